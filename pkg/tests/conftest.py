"""Shared fixtures: a miniature two-source registry with CSV and JSON-lines."""

import json

import pytest

from crossbot.ingest import SourceSchema, UserRecord

CSV_FIELD_MAP = {
    "followers": "followers_count",
    "friends": "friends_count",
    "statuses": "statuses_count",
    "name": "name",
    "screen_name": "screen_name",
    "description": "description",
    "location": "location",
    "verified": "verified",
    "lang": "lang",
}


@pytest.fixture
def csv_source(tmp_path):
    path = tmp_path / "early.csv"
    path.write_text(
        "id,label,followers,friends,statuses,name,screen_name,description,location,verified,lang,posts\n"
        'u1,human,705,1249,1568,Rex Barker,rex_bark,a dog with a keyboard,,false,en,"[""hello world"", ""walk time""]"\n'
        'u2,bot,10,2000,99,Deal Bot,deals4u,Buy cheap followers now,Earth,false,en,"[""Buy cheap followers http://x.co""]"\n'
        'u3,human,50,60,10,Ann,ann,,Rome,true,it,"[]"\n',
        encoding="utf-8",
    )
    schema = SourceSchema(
        dataset_id="early-2015",
        release_year=2015,
        path=str(path),
        format="csv",
        id_column="id",
        field_map=dict(CSV_FIELD_MAP),
        label_column="label",
        posts_column="posts",
    )
    return path, schema


@pytest.fixture
def jsonl_source(tmp_path):
    path = tmp_path / "late.jsonl"
    rows = [
        {
            "uid": "u2",
            "kind": "bot",
            "followers": 11,
            "friends": 1500,
            "bio": "same account, later dataset",
            "history": ["follow back!"],
            "links": [["friend", "u4"]],
        },
        {
            "uid": "u4",
            "kind": "human",
            "followers": 300,
            "friends": 200,
            "bio": "likes tea",
            "history": [],
            "links": [["friend", "u2"]],
        },
        {
            "uid": "u5",
            "kind": "bot",
            "followers": 1,
            "friends": 5000,
            "bio": None,
            "history": ["click here http://spam.example", "click here http://spam.example"],
            "links": [],
        },
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    schema = SourceSchema(
        dataset_id="late-2019",
        release_year=2019,
        path=str(path),
        format="jsonl",
        id_column="uid",
        field_map={"followers": "followers_count", "friends": "friends_count", "bio": "description"},
        label_column="kind",
        bot_values=("bot",),
        human_values=("human",),
        posts_column="history",
        relations_column="links",
    )
    return path, schema


@pytest.fixture
def registry_toml(tmp_path, csv_source, jsonl_source):
    csv_path, _ = csv_source
    jsonl_path, _ = jsonl_source
    path = tmp_path / "registry.toml"
    path.write_text(
        f"""
[sources.early-2015]
path = "{csv_path.name}"
format = "csv"
release_year = 2015
id_column = "id"
label_column = "label"
posts_column = "posts"

[sources.early-2015.field_map]
followers = "followers_count"
friends = "friends_count"
statuses = "statuses_count"
name = "name"
screen_name = "screen_name"
description = "description"
location = "location"
verified = "verified"
lang = "lang"

[sources.late-2019]
path = "{jsonl_path.name}"
format = "jsonl"
release_year = 2019
id_column = "uid"
label_column = "kind"
bot_values = ["bot"]
human_values = ["human"]
posts_column = "history"
relations_column = "links"

[sources.late-2019.field_map]
followers = "followers_count"
friends = "friends_count"
bio = "description"
""",
        encoding="utf-8",
    )
    return path


def make_record(user_id="u1", dataset_id="d", year=2015, label=0, domain=0, **kwargs):
    return UserRecord(
        user_id=user_id,
        dataset_id=dataset_id,
        release_year=year,
        label=label,
        domain_id=domain,
        profile=kwargs.pop("profile", {}),
        posts=kwargs.pop("posts", []),
        relations=kwargs.pop("relations", []),
    )
