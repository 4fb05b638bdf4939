"""Built-in model gallery.

Every model family used by the worked examples, keyed by name and
parametrized where the family has a knob.  All measures are normalized
target-potential constructions, so the reversible density is exactly
exp(-potential) up to the diffusion factor.
"""

from __future__ import annotations

from . import model as md

__all__ = ["gallery_model", "gallery_names", "GALLERY"]


def ou() -> md.DiffusionModel:
    return md.build_model(sigma="1", target_potential="x^2/2", name="ou")


def power(alpha: float) -> md.DiffusionModel:
    """Measure exp(-|x|^alpha / alpha); alpha = 2 is the Gaussian."""
    alpha = float(alpha)
    if not alpha > 0:
        raise md.ModelError(f"power exponent must be positive, got {alpha}")
    return md.build_model(
        sigma="1",
        target_potential="(x^2)^(a/2)/a",
        params={"a": alpha},
        name=f"power({alpha:g})",
    )


def quartic() -> md.DiffusionModel:
    return md.build_model(sigma="1", target_potential="x^4/4", name="quartic")


def smoothed_exponential(delta: float = 1e-3) -> md.DiffusionModel:
    """Two-sided exponential with the kink at 0 mollified at scale delta."""
    delta = float(delta)
    if not delta > 0:
        raise md.ModelError(f"smoothing scale must be positive, got {delta}")
    return md.build_model(
        sigma="1",
        target_potential="sqrt(x^2 + d^2)",
        params={"d": delta},
        name=f"smoothed-exponential({delta:g})",
    )


def double_well(beta: float) -> md.DiffusionModel:
    return md.build_model(
        sigma="1",
        target_potential="(x^2 - b)^2/4",
        params={"b": float(beta)},
        name=f"double-well({float(beta):g})",
    )


def cauchy(beta: float = 2.5, variant: str = "sqrt") -> md.DiffusionModel:
    """Heavy-tailed measure (1+x^2)^{-beta} with a growing diffusion
    coefficient; variant picks sigma = sqrt(1+x^2) or sigma = 1+x^2."""
    beta = float(beta)
    if variant not in ("sqrt", "linear"):
        raise md.ModelError(f"cauchy variant must be 'sqrt' or 'linear', got {variant!r}")
    if not beta > 0.5:
        raise md.ModelError(f"cauchy exponent must exceed 1/2, got {beta}")
    sigma = "sqrt(1+x^2)" if variant == "sqrt" else "1+x^2"
    return md.build_model(
        sigma=sigma,
        target_potential="b*log(1+x^2)",
        params={"b": beta},
        name=f"cauchy({beta:g},{variant})",
    )


GALLERY = {
    "ou": (ou, (), {}),
    "power": (power, ("alpha",), {}),
    "quartic": (quartic, (), {}),
    "smoothed-exponential": (smoothed_exponential, (), {"delta": 1e-3}),
    "double-well": (double_well, ("beta",), {}),
    "cauchy": (cauchy, (), {"beta": 2.5, "variant": "sqrt"}),
}


def gallery_names() -> list[str]:
    return sorted(GALLERY)


def gallery_model(name: str, **params) -> md.DiffusionModel:
    """Instantiate a gallery model; required parameters must be supplied,
    optional ones have defaults."""
    if name not in GALLERY:
        raise md.ModelError(
            f"unknown gallery model {name!r}; available: {', '.join(gallery_names())}")
    fn, required, optional = GALLERY[name]
    missing = [k for k in required if k not in params]
    if missing:
        raise md.ModelError(f"gallery model {name!r} needs parameters {missing}")
    extra = [k for k in params if k not in required and k not in optional]
    if extra:
        raise md.ModelError(f"gallery model {name!r} does not take parameters {extra}")
    kwargs = dict(optional)
    kwargs.update(params)
    return fn(**kwargs)
