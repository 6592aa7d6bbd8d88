"""Problem-file ingestion: one YAML document describing sources, distortion
and the region slack. Probabilities may be written as fractions ("1/3"), so
rational instances stay exact all the way into the region computations."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import yaml

from .errors import ValidationError
from .probcore import DistortionMatrix, SourceList


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A fully validated problem instance."""

    alphabet_x: int
    alphabet_y: int
    sources: SourceList
    distortion: DistortionMatrix
    delta: Fraction
    labels: tuple[str, ...] | None = None


def parse_number(value) -> Fraction:
    """Accept ints, fraction strings like "2/3", and decimal literals.

    Decimal floats are read through their shortest repr, so 0.1 means 1/10.
    """
    if isinstance(value, bool):
        raise ValidationError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse number {value!r}") from exc
    raise ValidationError(f"cannot parse number {value!r}")


def parse_vector(text: str) -> list[Fraction]:
    """Parse a comma- or space-separated vector of numbers."""
    tokens = [t for t in text.replace(",", " ").split() if t]
    if not tokens:
        raise ValidationError("empty vector")
    return [parse_number(t) for t in tokens]


def _require(mapping: dict, key: str):
    if key not in mapping:
        raise ValidationError(f"problem file is missing required key {key!r}")
    return mapping[key]


def load_problem(path: str) -> ProblemSpec:
    """Load and fully validate a problem file before any computation."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read problem file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"problem file is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("problem file must be a mapping of keys to values")

    try:
        alphabet_x = int(_require(raw, "alphabet_x"))
        alphabet_y = int(_require(raw, "alphabet_y"))
    except (TypeError, ValueError) as exc:
        raise ValidationError("alphabet sizes must be integers") from exc
    mode = raw.get("mode", "independent")
    sources_raw = _require(raw, "sources")
    if mode == "independent":
        if not isinstance(sources_raw, list) or not all(
            isinstance(row, list) for row in sources_raw
        ):
            raise ValidationError("independent sources must be a list of PMF rows")
        rows = [[parse_number(x) for x in row] for row in sources_raw]
        for row in rows:
            if len(row) != alphabet_x:
                raise ValidationError(
                    f"source row has {len(row)} entries, alphabet_x is {alphabet_x}"
                )
        sources = SourceList.independent(rows)
    elif mode == "joint":
        try:
            num_sources = int(_require(raw, "num_sources"))
        except (TypeError, ValueError) as exc:
            raise ValidationError("num_sources must be an integer") from exc
        if not isinstance(sources_raw, list) or any(
            isinstance(x, list) for x in sources_raw
        ):
            raise ValidationError("joint sources must be a flat PMF list")
        pmf = [parse_number(x) for x in sources_raw]
        sources = SourceList.joint(pmf, alphabet_x, num_sources)
    else:
        raise ValidationError(f"unknown mode {mode!r}")

    distortion_raw = _require(raw, "distortion")
    if not isinstance(distortion_raw, list) or not all(
        isinstance(row, list) for row in distortion_raw
    ):
        raise ValidationError("distortion must be a list of rows")
    dist_rows = [[float(parse_number(x)) for x in row] for row in distortion_raw]
    if len(dist_rows) != alphabet_x or any(len(r) != alphabet_y for r in dist_rows):
        raise ValidationError(
            f"distortion must be {alphabet_x} rows of {alphabet_y} entries"
        )
    distortion = DistortionMatrix(dist_rows)

    delta = parse_number(raw.get("delta", 0))
    if delta < 0:
        raise ValidationError("delta must be nonnegative")

    labels = raw.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or len(labels) != alphabet_x:
            raise ValidationError("labels must list one name per source symbol")
        labels = tuple(str(x) for x in labels)

    return ProblemSpec(
        alphabet_x=alphabet_x,
        alphabet_y=alphabet_y,
        sources=sources,
        distortion=distortion,
        delta=delta,
        labels=labels,
    )
