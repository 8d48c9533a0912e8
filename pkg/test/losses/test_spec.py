import pytest
from pydantic import TypeAdapter, ValidationError
from sslforge.errors import SpecError
from sslforge.losses import LossSpec, registry_spec
from sslforge.losses.spec import ByolSpec, DinoSpec, GeneralizedSpec, NtXentSpec, VicRegSpec

adapter = TypeAdapter(LossSpec)


@pytest.mark.parametrize(
    "data,cls,family",
    [
        ({"kind": "nt_xent"}, NtXentSpec, "pairwise"),
        ({"kind": "byol"}, ByolSpec, "teacher"),
        ({"kind": "dino", "tau_t": 0.04}, DinoSpec, "teacher"),
        ({"kind": "vicreg", "inv": 10}, VicRegSpec, "branches"),
        ({"kind": "generalized", "row": "triplet"}, GeneralizedSpec, "pairwise"),
    ],
)
def test_kind_selects_spec(data: dict, cls: type, family: str):
    spec = adapter.validate_python(data)
    assert isinstance(spec, cls)
    assert spec.family == family


def test_teacher_and_predictor_flags():
    byol = adapter.validate_python({"kind": "byol"})
    assert byol.uses_teacher and byol.uses_predictor
    simsiam = adapter.validate_python({"kind": "simsiam"})
    assert simsiam.uses_predictor and not simsiam.uses_teacher


@pytest.mark.parametrize(
    "data",
    [
        {"kind": "mystery"},
        {"kind": "nt_xent", "tau": 0},
        {"kind": "nt_xent", "temperature": 0.5},
        {"kind": "masked_recon", "ratio": 1.0},
        {"kind": "generalized", "phi": {"kind": "identity"}},
        {"kind": "generalized", "row": "infonce", "phi": {"kind": "identity"}, "psi": {"kind": "exp"}},
    ],
)
def test_invalid_specs(data: dict):
    with pytest.raises(ValidationError):
        adapter.validate_python(data)


def test_generalized_defaults_to_infonce_row():
    spec = GeneralizedSpec(tau=0.2, eps=0.0)
    assert spec.phi_psi() == registry_spec("infonce", tau=0.2, eps=0.0)


def test_generalized_explicit_functions_are_checked():
    spec = adapter.validate_python(
        {
            "kind": "generalized",
            "phi": {"kind": "affine", "scale": -1.0},
            "psi": {"kind": "exp"},
        }
    )
    with pytest.raises(SpecError):
        spec.phi_psi()


def test_vicreg_spec_carries_weights():
    spec = VicRegSpec(inv=1.0, var=2.0, cov=3.0)
    assert (spec.inv, spec.var, spec.cov, spec.gamma) == (1.0, 2.0, 3.0, 1.0)
