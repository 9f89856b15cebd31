"""Profile feature derivation and slot-based text rendering.

A raw account profile is a mapping from raw field ids (``RAW_PROFILE_FIELDS``)
to values; missing columns/nulls are simply absent keys.  From it we compute
an availability mask, the 39-feature map (13 passthrough + 26 derived), and
the fixed-order slot text used inside instruction documents.  Every feature
whose required raw inputs are missing renders the placeholder token instead
of a value.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Optional

PLACEHOLDER = "unavailable"

# Raw ingestable fields. Column-level presence is what the availability mask
# tracks; an empty string is still "present" (only missing columns/nulls
# clear the bit).
RAW_PROFILE_FIELDS = (
    "followers_count",
    "friends_count",
    "statuses_count",
    "favourites_count",
    "listed_count",
    "verified",
    "protected",
    "default_profile",
    "default_profile_image",
    "geo_enabled",
    "profile_use_background_image",
    "profile_background_tile",
    "name",
    "screen_name",
    "description",
    "location",
    "url",
    "lang",
    "time_zone",
    "utc_offset",
    "profile_banner_url",
)

CATEGORY_BASIC = "Account Basic Information"
CATEGORY_COMPLETENESS = "Profile Completeness Features"
CATEGORY_TEXT_STATS = "Profile Text Statistics Features"
CATEGORY_NAME = "Name Features"
CATEGORY_LANG_GEO = "Language and Geographic Features"
CATEGORY_DESCRIPTION = "Description Text"

CATEGORY_ORDER = (
    CATEGORY_BASIC,
    CATEGORY_COMPLETENESS,
    CATEGORY_TEXT_STATS,
    CATEGORY_NAME,
    CATEGORY_LANG_GEO,
    CATEGORY_DESCRIPTION,
)

# (feature name, category, required raw fields). Order is the rendering
# order; categories are contiguous runs.
FEATURE_SCHEMA = (
    ("followers_count", CATEGORY_BASIC, ("followers_count",)),
    ("friends_count", CATEGORY_BASIC, ("friends_count",)),
    ("ff_ratio", CATEGORY_BASIC, ("followers_count", "friends_count")),
    ("statuses_count", CATEGORY_BASIC, ("statuses_count",)),
    ("favourites_count", CATEGORY_BASIC, ("favourites_count",)),
    ("listed_count", CATEGORY_BASIC, ("listed_count",)),
    ("verified", CATEGORY_BASIC, ("verified",)),
    ("protected", CATEGORY_BASIC, ("protected",)),
    ("default_profile_image", CATEGORY_BASIC, ("default_profile_image",)),
    ("default_profile", CATEGORY_BASIC, ("default_profile",)),
    ("geo_enabled", CATEGORY_BASIC, ("geo_enabled",)),
    ("lang_hint", CATEGORY_BASIC, ("lang",)),
    ("location_present", CATEGORY_COMPLETENESS, ("location",)),
    ("profile_banner_url_present", CATEGORY_COMPLETENESS, ("profile_banner_url",)),
    ("profile_use_background_image", CATEGORY_COMPLETENESS, ("profile_use_background_image",)),
    ("profile_background_tile", CATEGORY_COMPLETENESS, ("profile_background_tile",)),
    ("time_zone_present", CATEGORY_COMPLETENESS, ("time_zone",)),
    ("utc_offset_present", CATEGORY_COMPLETENESS, ("utc_offset",)),
    ("desc_length", CATEGORY_TEXT_STATS, ("description",)),
    ("emoji_count", CATEGORY_TEXT_STATS, ("description",)),
    ("has_url_in_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("has_mention_in_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("has_hashtag_in_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("has_email_in_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("has_phone_in_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("has_promo_keyword_in_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("url_category_desc", CATEGORY_TEXT_STATS, ("description",)),
    ("has_url_in_bio", CATEGORY_TEXT_STATS, ("url",)),
    ("url_category_bio", CATEGORY_TEXT_STATS, ("url",)),
    ("name_length", CATEGORY_NAME, ("name",)),
    ("name_digit_ratio", CATEGORY_NAME, ("name",)),
    ("name_special_char_ratio", CATEGORY_NAME, ("name",)),
    ("screen_name_length", CATEGORY_NAME, ("screen_name",)),
    ("screen_name_digit_ratio", CATEGORY_NAME, ("screen_name",)),
    ("screen_name_underscore_ratio", CATEGORY_NAME, ("screen_name",)),
    ("name_screen_name_similarity", CATEGORY_NAME, ("name", "screen_name")),
    ("lang_timezone_mismatch", CATEGORY_LANG_GEO, ("lang", "time_zone")),
    ("location_generic_flag", CATEGORY_LANG_GEO, ("location",)),
    ("description", CATEGORY_DESCRIPTION, ("description",)),
)

FEATURE_NAMES = tuple(name for name, _, _ in FEATURE_SCHEMA)

N_FEATURES = len(FEATURE_SCHEMA)
assert N_FEATURES == 39

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
_EMAIL_RE = re.compile(r"[\w.+-]+@[\w-]+\.[\w.\-]+")
# seven or more digits, separators allowed between them
_PHONE_RE = re.compile(r"\+?\d(?:[\s\-().]?\d){6,}")

# Common emoji code point ranges (pictographs, emoticons, transport,
# supplemental symbols, dingbats, regional indicators).
_EMOJI_RANGES = (
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0x1FA00, 0x1FAFF),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
    (0x1F1E6, 0x1F1FF),
)


def _load_lines(filename: str) -> tuple[str, ...]:
    text = resources.files("crossbot.data").joinpath(filename).read_text("utf-8")
    return tuple(
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


def _load_json(filename: str):
    text = resources.files("crossbot.data").joinpath(filename).read_text("utf-8")
    return json.loads(text)


class FeatureLexicons:
    """Editable keyword tables backing the pattern-rule features."""

    def __init__(
        self,
        promo_keywords=None,
        generic_locations=None,
        url_categories=None,
        lang_regions=None,
    ):
        self.promo_keywords = promo_keywords or _load_lines("promo_keywords.txt")
        self.generic_locations = generic_locations or _load_lines("generic_locations.txt")
        self.url_categories = url_categories or _load_json("url_categories.json")
        self.lang_regions = lang_regions or _load_json("lang_regions.json")


_default_lexicons: Optional[FeatureLexicons] = None


def default_lexicons() -> FeatureLexicons:
    global _default_lexicons
    if _default_lexicons is None:
        _default_lexicons = FeatureLexicons()
    return _default_lexicons


@dataclass(frozen=True)
class ProfileRendering:
    """Slot strings, grouped text, feature map and availability masks.

    ``text`` is the concatenation of ``slots`` in schema order with the
    category header interleaved before each category run (the header line
    convention of the instruction format; slot content itself is untouched
    except that each category's trailing separator becomes a period).
    """

    slots: tuple[str, ...]
    text: str
    features: dict
    mask: tuple[bool, ...]
    raw_mask: dict


def availability_mask(profile: Optional[Mapping]) -> dict:
    """Column-level availability of each raw field (None counts as absent)."""
    profile = profile or {}
    return {f: (f in profile and profile[f] is not None) for f in RAW_PROFILE_FIELDS}


def feature_availability(raw_mask: Mapping) -> tuple[bool, ...]:
    """A feature is renderable iff all of its required raw inputs are present."""
    return tuple(
        all(raw_mask.get(req, False) for req in required)
        for _, _, required in FEATURE_SCHEMA
    )


def _as_int(value) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)):
        return int(value)
    try:
        return int(str(value).strip())
    except (TypeError, ValueError):
        return 0


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return bool(value)
    return str(value).strip().lower() in ("true", "1", "t", "yes")


def _as_text(value) -> str:
    return "" if value is None else str(value)


def _digit_ratio(s: str) -> float:
    if not s:
        return 0.0
    return sum(c.isdigit() for c in s) / len(s)


def _special_char_ratio(s: str) -> float:
    if not s:
        return 0.0
    return sum(not (c.isalnum() or c.isspace()) for c in s) / len(s)


def _emoji_count(s: str) -> int:
    return sum(any(lo <= ord(c) <= hi for lo, hi in _EMOJI_RANGES) for c in s)


def _levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def name_similarity(a: str, b: str) -> float:
    """Normalized edit similarity in [0, 1], case-insensitive and symmetric."""
    a, b = a.lower(), b.lower()
    if not a and not b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - _levenshtein(a, b) / longest


def _keyword_hit(text: str, keywords) -> bool:
    low = text.lower()
    for kw in keywords:
        if re.search(r"(?<!\w)" + re.escape(kw) + r"(?!\w)", low):
            return True
    return False


def _url_categories(urls, taxonomy) -> list:
    cats = set()
    for url in urls:
        host = re.sub(r"^(?:https?://)?(?:www\.)?", "", url.lower()).split("/")[0]
        matched = False
        for category, keywords in taxonomy.items():
            if any(kw in host for kw in keywords):
                cats.add(category)
                matched = True
        if not matched:
            cats.add("other")
    return sorted(cats)


def _lang_tz_mismatch(lang: str, tz: str, lang_regions) -> bool:
    lang = lang.strip().lower().split("-")[0]
    tz_low = tz.strip().lower()
    regions = lang_regions.get(lang)
    if not regions or not tz_low:
        return False
    return not any(region.lower() in tz_low for region in regions)


def derive_features(profile: Optional[Mapping], lexicons: Optional[FeatureLexicons] = None) -> dict:
    """Compute the full 39-entry feature map from a raw profile mapping.

    Missing inputs yield each feature's neutral value (ratios 0, flags
    false, lists empty, counts 0, ``lang_hint`` "und", text "").  Ratios are
    kept at full precision here; rendering rounds to 2 decimals.
    """
    profile = profile or {}
    lex = lexicons or default_lexicons()

    followers = _as_int(profile.get("followers_count"))
    friends = _as_int(profile.get("friends_count"))
    desc = _as_text(profile.get("description"))
    name = _as_text(profile.get("name"))
    screen = _as_text(profile.get("screen_name"))
    location = _as_text(profile.get("location"))
    bio_url = _as_text(profile.get("url"))
    lang = _as_text(profile.get("lang"))
    tz = _as_text(profile.get("time_zone"))

    desc_urls = _URL_RE.findall(desc)
    bio_urls = _URL_RE.findall(bio_url) if bio_url else []
    if bio_url and not bio_urls:
        # a bare domain in the url field still counts as a URL
        bio_urls = [bio_url]

    feats: dict = {
        "followers_count": followers,
        "friends_count": friends,
        "ff_ratio": followers / max(friends, 1),
        "statuses_count": _as_int(profile.get("statuses_count")),
        "favourites_count": _as_int(profile.get("favourites_count")),
        "listed_count": _as_int(profile.get("listed_count")),
        "verified": _as_bool(profile.get("verified")),
        "protected": _as_bool(profile.get("protected")),
        "default_profile_image": _as_bool(profile.get("default_profile_image")),
        "default_profile": _as_bool(profile.get("default_profile")),
        "geo_enabled": _as_bool(profile.get("geo_enabled")),
        "lang_hint": lang.strip().lower() or "und",
        "location_present": bool(location.strip()),
        "profile_banner_url_present": bool(_as_text(profile.get("profile_banner_url")).strip()),
        "profile_use_background_image": _as_bool(profile.get("profile_use_background_image")),
        "profile_background_tile": _as_bool(profile.get("profile_background_tile")),
        "time_zone_present": bool(tz.strip()),
        "utc_offset_present": profile.get("utc_offset") is not None
        and str(profile.get("utc_offset")).strip() != "",
        "desc_length": len(desc),
        "emoji_count": _emoji_count(desc),
        "has_url_in_desc": bool(desc_urls),
        "has_mention_in_desc": bool(_MENTION_RE.search(desc)),
        "has_hashtag_in_desc": bool(_HASHTAG_RE.search(desc)),
        "has_email_in_desc": bool(_EMAIL_RE.search(desc)),
        "has_phone_in_desc": bool(_PHONE_RE.search(desc)),
        "has_promo_keyword_in_desc": _keyword_hit(desc, lex.promo_keywords),
        "url_category_desc": _url_categories(desc_urls, lex.url_categories),
        "has_url_in_bio": bool(bio_url.strip()),
        "url_category_bio": _url_categories(bio_urls, lex.url_categories),
        "name_length": len(name),
        "name_digit_ratio": _digit_ratio(name),
        "name_special_char_ratio": _special_char_ratio(name),
        "screen_name_length": len(screen),
        "screen_name_digit_ratio": _digit_ratio(screen),
        "screen_name_underscore_ratio": (screen.count("_") / len(screen)) if screen else 0.0,
        "name_screen_name_similarity": name_similarity(name, screen),
        "lang_timezone_mismatch": _lang_tz_mismatch(lang, tz, lex.lang_regions),
        "location_generic_flag": location.strip().lower() in lex.generic_locations,
        "description": desc,
    }
    return feats


_RATIO_FEATURES = frozenset(
    (
        "ff_ratio",
        "name_digit_ratio",
        "name_special_char_ratio",
        "screen_name_digit_ratio",
        "screen_name_underscore_ratio",
        "name_screen_name_similarity",
    )
)


def format_value(field_id: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if field_id in _RATIO_FEATURES:
        return str(round(float(value), 2))
    if isinstance(value, float):
        return str(round(value, 2))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(str(v) for v in value) + "]"
    return str(value)


def render_slot(field_id: str, value, available: bool) -> str:
    """Render one "name = value; " slot; placeholder when unavailable.

    The free-text description slot carries the raw text with no name prefix.
    """
    if field_id == "description":
        return _as_text(value) if available else PLACEHOLDER
    rendered = format_value(field_id, value) if available else PLACEHOLDER
    return f"{field_id} = {rendered}; "


def render_profile(profile: Optional[Mapping], lexicons: Optional[FeatureLexicons] = None) -> ProfileRendering:
    """Render the full slot text for a raw profile mapping.

    Deterministic in the schema order regardless of the insertion order of
    the raw mapping.
    """
    raw_mask = availability_mask(profile)
    fmask = feature_availability(raw_mask)
    feats = derive_features(profile, lexicons)

    slots = tuple(
        render_slot(name, feats[name], fmask[j])
        for j, (name, _, _) in enumerate(FEATURE_SCHEMA)
    )

    lines = []
    for category in CATEGORY_ORDER:
        run = [
            slots[j]
            for j, (_, cat, _) in enumerate(FEATURE_SCHEMA)
            if cat == category
        ]
        if category == CATEGORY_DESCRIPTION:
            lines.append(f"{category}: {run[0]}")
        else:
            body = "".join(run).rstrip()
            body = body[:-1] + "." if body.endswith(";") else body
            lines.append(f"{category}: {body}")
    text = "\n\n".join(lines)

    return ProfileRendering(slots=slots, text=text, features=feats, mask=fmask, raw_mask=raw_mask)


def features_to_csv_row(features: Mapping) -> dict:
    """Flatten a feature map for CSV export (lists pipe-joined)."""
    row = {}
    for name in FEATURE_NAMES:
        value = features[name]
        if isinstance(value, (list, tuple)):
            row[name] = "|".join(str(v) for v in value)
        elif isinstance(value, bool):
            row[name] = "true" if value else "false"
        elif isinstance(value, float):
            row[name] = repr(value)
        else:
            row[name] = str(value)
    return row
