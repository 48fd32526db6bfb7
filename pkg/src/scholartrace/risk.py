"""Long-term cardiovascular risk in the proportional-hazards survival form.

risk = 1 - S0 ** exp(L - mean_linear_predictor), with L a weighted sum
of transformed predictors. Coefficient values are deployment data
loaded from config, never hard-coded here; bundled example models are
synthetic and labeled as such.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import exp, log
from pathlib import Path

from .psychometrics import BasicInfo

PREDICTORS = ("age", "bmi", "sbp", "on_antihypertensives", "smoker", "diabetic", "sex")
TRANSFORMS = ("identity", "log")

# Booleans enter the linear predictor as 0/1; sex as male=1, female=0.
_SEX_CODE = {"female": 0.0, "male": 1.0}


class SchemaError(ValueError):
    pass


class UnknownPredictor(ValueError):
    pass


class TransformDomain(ValueError):
    """log transform applied to a non-positive predictor value."""


@dataclass(frozen=True)
class RiskModel:
    name: str
    coefficients: tuple[tuple[str, float], ...]
    transforms: dict[str, str]
    s0: float
    mean_lp: float


@dataclass(frozen=True)
class RiskProfile:
    age: float
    bmi: float
    sbp: float
    on_antihypertensives: bool
    smoker: bool
    diabetic: bool
    sex: str

    @classmethod
    def from_basic_info(cls, b: BasicInfo) -> "RiskProfile":
        return cls(
            age=b.age,
            bmi=b.bmi,
            sbp=b.sbp,
            on_antihypertensives=b.on_antihypertensives,
            smoker=b.smoker,
            diabetic=b.diabetic,
            sex=b.sex,
        )

    def value(self, predictor: str) -> float:
        v = getattr(self, predictor)
        if predictor == "sex":
            return _SEX_CODE[v]
        if isinstance(v, bool):
            return 1.0 if v else 0.0
        return float(v)


def load_model(doc: dict | str | Path) -> RiskModel:
    """Validate a model config document into a RiskModel.

    Accepts a parsed dict or a path to a JSON file with keys
    name/coefficients/transforms/s0/mean_lp.
    """
    if isinstance(doc, (str, Path)):
        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("model config must be a JSON object")
    for key in ("name", "coefficients", "transforms", "s0", "mean_lp"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}")
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise SchemaError("name must be a non-empty string")
    raw_coeffs = doc["coefficients"]
    if not isinstance(raw_coeffs, (list, tuple)):
        raise SchemaError("coefficients must be a list of [predictor, beta] pairs")
    coeffs = []
    for entry in raw_coeffs:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise SchemaError(f"bad coefficient entry: {entry!r}")
        pred, beta = entry
        if pred not in PREDICTORS:
            raise UnknownPredictor(f"{pred!r} is not a known predictor")
        coeffs.append((pred, float(beta)))
    transforms = doc["transforms"]
    if not isinstance(transforms, dict):
        raise SchemaError("transforms must be an object")
    for pred, tf in transforms.items():
        if pred not in PREDICTORS:
            raise UnknownPredictor(f"{pred!r} is not a known predictor")
        if tf not in TRANSFORMS:
            raise SchemaError(f"unknown transform {tf!r} for {pred!r}")
    # every predictor referenced by a coefficient has a transform
    full = {pred: transforms.get(pred, "identity") for pred, _ in coeffs}
    s0 = doc["s0"]
    if not isinstance(s0, (int, float)) or isinstance(s0, bool) or not 0.0 < s0 < 1.0:
        raise SchemaError(f"s0 must lie strictly in (0, 1), got {s0!r}")
    mean_lp = doc["mean_lp"]
    if not isinstance(mean_lp, (int, float)) or isinstance(mean_lp, bool):
        raise SchemaError(f"mean_lp must be a number, got {mean_lp!r}")
    return RiskModel(
        name=name,
        coefficients=tuple(coeffs),
        transforms=full,
        s0=float(s0),
        mean_lp=float(mean_lp),
    )


def linear_predictor(p: RiskProfile, m: RiskModel) -> float:
    total = 0.0
    for pred, beta in m.coefficients:
        x = p.value(pred)
        if m.transforms[pred] == "log":
            if x <= 0.0:
                raise TransformDomain(f"log transform of non-positive {pred}={x}")
            x = log(x)
        total += beta * x
    return total


def risk_score(p: RiskProfile, m: RiskModel) -> float:
    """Probability 1 - S0 ** exp(L - mean_lp); in (0, 1) by construction."""
    return 1.0 - m.s0 ** exp(linear_predictor(p, m) - m.mean_lp)
