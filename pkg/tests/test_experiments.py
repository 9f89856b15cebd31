import numpy as np
import pytest

from crossbot.experiments import (
    ablation_run,
    config_digest,
    data_digest,
    distribution_report,
    domain_probe,
    probe_gap,
    run_manifest,
    split_target,
    sweep,
    train_once,
    evaluate_target,
)
from crossbot.summary import PostSummary
from crossbot.synthetic import SyntheticSpec, generate_synthetic

FAST = dict(
    hidden_dim=12,
    latent_dim=6,
    proj_dim=4,
    epochs=2,
    batch_size=32,
    learning_rate=1e-3,
    dtype="float64",
)


@pytest.fixture(scope="module")
def tiny_corpus():
    return generate_synthetic(SyntheticSpec(n_per_cell=40, dim=8, seed=2))


class TestAblation:
    def test_four_configs_with_seed_stats(self, tiny_corpus):
        rows = ablation_run(tiny_corpus, seeds=(1, 2, 3), **FAST)
        assert [r.name for r in rows] == ["full", "wo_adversarial", "wo_contrast", "wo_adv_con"]
        for row in rows:
            assert len(row.accuracies) == 3
            assert 0.0 <= row.mean_accuracy <= 1.0
            assert row.std_accuracy >= 0.0

    def test_lambda_values_echoed(self, tiny_corpus):
        rows = ablation_run(tiny_corpus, seeds=(1,), lambda_adv=0.7, lambda_con=0.3, **FAST)
        by_name = {r.name: r for r in rows}
        assert by_name["full"].lambda_adv == 0.7
        assert by_name["full"].lambda_con == 0.3
        assert by_name["wo_adversarial"].lambda_adv == 0.0
        assert by_name["wo_adversarial"].lambda_con == 0.3
        assert by_name["wo_contrast"].lambda_con == 0.0
        assert by_name["wo_adv_con"].lambda_adv == 0.0

    def test_identical_weight_overrides_give_identical_reports(self, tiny_corpus):
        # all four configs collapse to the same run when the weights are zero
        rows = ablation_run(tiny_corpus, seeds=(5,), lambda_adv=0.0, lambda_con=0.0, **FAST)
        accs = {tuple(r.accuracies) for r in rows}
        assert len(accs) == 1

    def test_flat_row_format(self, tiny_corpus):
        row = ablation_run(tiny_corpus, seeds=(1, 2), **FAST)[0].flat_row()
        assert row["config"] == "full"
        assert row["seeds"] == "1|2"


class TestSweep:
    def test_single_point_matches_plain_run(self, tiny_corpus):
        rows = sweep(tiny_corpus, "lambda_adv", [0.2], seeds=(4,), fixed=0.2, **FAST)
        assert len(rows) == 1
        clf = train_once(tiny_corpus, 4, lambda_adv=0.2, lambda_con=0.2, **FAST)
        report = evaluate_target(clf, tiny_corpus, seed=4)
        assert rows[0].accuracies[0] == report.accuracy

    def test_curve_length(self, tiny_corpus):
        rows = sweep(tiny_corpus, "lambda_con", [0.0, 0.1, 0.4], seeds=(4,), **FAST)
        assert len(rows) == 3

    def test_unknown_weight_rejected(self, tiny_corpus):
        with pytest.raises(ValueError):
            sweep(tiny_corpus, "lambda_cls", [0.1], seeds=(1,), **FAST)


class TestDomainProbe:
    def test_identical_latents_probe_at_chance(self):
        latents = np.ones((300, 6))
        domains = np.tile([0, 1, 2], 100)
        acc = domain_probe(latents, domains, seed=0)
        assert abs(acc - 1 / 3) < 0.15

    def test_one_hot_latents_probe_perfectly(self):
        domains = np.tile([0, 1, 2], 100)
        latents = np.eye(3)[domains]
        assert domain_probe(latents, domains, seed=0) > 0.99

    def test_single_domain_rejected(self):
        with pytest.raises(ValueError, match="at least 2 domains"):
            domain_probe(np.ones((10, 3)), np.zeros(10, dtype=int))

    def test_permuted_labels_probe_near_chance(self):
        rng = np.random.default_rng(0)
        latents = rng.standard_normal((600, 6))
        latents[:, 0] = np.tile([0, 1, 2], 200) * 2.0  # genuine signal
        domains = np.tile([0, 1, 2], 200)
        assert domain_probe(latents, domains, seed=0) > 0.9
        shuffled = rng.permutation(domains)
        assert abs(domain_probe(latents, shuffled, seed=0) - 1 / 3) < 0.12

    def test_probe_gap_structure(self, tiny_corpus):
        out = probe_gap(tiny_corpus, seeds=(1,), **FAST)
        assert set(out) == {"probe_full", "probe_adv_off", "gap", "per_seed_full", "per_seed_adv_off"}


class TestTargetSplitMode:
    def test_split_disjoint_and_seeded(self, tiny_corpus):
        val, rest = split_target(tiny_corpus, seed=3)
        assert set(val).isdisjoint(rest)
        assert len(val) + len(rest) == len(tiny_corpus.x_target)
        val2, _ = split_target(tiny_corpus, seed=3)
        assert np.array_equal(val, val2)

    def test_target_split_evaluation_excludes_validation_rows(self, tiny_corpus):
        clf = train_once(tiny_corpus, 1, validation_mode="target-split", **FAST)
        report = evaluate_target(clf, tiny_corpus, seed=1, validation_mode="target-split")
        val, rest = split_target(tiny_corpus, seed=1, fraction=clf.validation_split)
        assert report.n == len(rest)


def make_summary(**kwargs):
    base = dict(theme=("Politics",), sent=("Neutral",), emo=("CalmOrObjective",),
                style=("Casual",), func=("MeNow",))
    base.update(kwargs)
    return PostSummary(**base)


class TestDistributionReport:
    def test_single_user_full_frequency(self):
        rows = distribution_report([(make_summary(), "bot", "ds1")])
        politics = [r for r in rows if r["dimension"] == "theme"]
        assert politics == [
            {
                "dataset": "ds1",
                "label": "bot",
                "dimension": "theme",
                "category": "Politics",
                "count": 1,
                "users": 1,
                "frequency": 1.0,
            }
        ]

    def test_multi_label_counts_once_per_label(self):
        s = make_summary(theme=("Politics", "Sports"))
        rows = distribution_report([(s, "bot", "ds1"), (make_summary(), "bot", "ds1")])
        themes = {r["category"]: r for r in rows if r["dimension"] == "theme"}
        assert themes["Politics"]["count"] == 2
        assert themes["Politics"]["frequency"] == 1.0
        assert themes["Sports"]["count"] == 1
        assert themes["Sports"]["frequency"] == 0.5

    def test_two_user_hand_tally(self):
        a = make_summary(sent=("Positive",))
        b = make_summary(sent=("Negative", "Mixed"))
        rows = distribution_report([(a, "human", "ds"), (b, "human", "ds")])
        sents = {r["category"]: r["frequency"] for r in rows if r["dimension"] == "sent"}
        assert sents == {"Positive": 0.5, "Negative": 0.5, "Mixed": 0.5}

    def test_cells_are_separate(self):
        rows = distribution_report([(make_summary(), "bot", "a"), (make_summary(), "human", "a")])
        assert {(r["dataset"], r["label"]) for r in rows} == {("a", "bot"), ("a", "human")}


class TestManifest:
    def test_digest_stable_and_sensitive(self):
        a = config_digest({"x": 1, "y": [1, 2]})
        assert a == config_digest({"y": [1, 2], "x": 1})
        assert a != config_digest({"x": 2, "y": [1, 2]})

    def test_data_digest(self):
        x = np.arange(10.0)
        assert data_digest(x) == data_digest(x.copy())
        assert data_digest(x) != data_digest(x + 1)

    def test_run_manifest_fields(self):
        m = run_manifest({"a": 1}, (1, 2), "deadbeef")
        assert m["seeds"] == [1, 2]
        assert m["inputs_digest"] == "deadbeef"
        assert m["config_digest"] == config_digest({"a": 1})
