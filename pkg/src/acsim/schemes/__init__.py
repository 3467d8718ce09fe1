"""Built-in schemes and implementations, addressable by name."""

from ..errors import ConfigError
from . import adac, dac_v, gms, rbac_u, sd3gm

SCHEMES = {
    "gms": gms.gms_scheme,
    "rbac": rbac_u.rbac_scheme,
    "rbac_u": rbac_u.rbac_u_scheme,
    "dac": dac_v.dac_scheme,
    "dac_v": dac_v.dac_v_scheme,
    "sd3gm": sd3gm.sd3gm_scheme,
    "adac": adac.adac_scheme,
    "dac_m": adac.dac_m_scheme,
    "dac_grant_all": adac.dac_grant_all_scheme,
}

IMPLEMENTATIONS = {
    "sigma_r": rbac_u.sigma_r,
    "sigma_d": dac_v.sigma_d,
    "sigma_s": sd3gm.sigma_s,
    "sigma_adac": adac.sigma_adac,
}

# candidate scheme -> the implementation used by the case study
CASE_STUDY_IMPLS = {"rbac_u": "sigma_r", "dac_v": "sigma_d", "sd3gm": "sigma_s"}


def scheme(name: str):
    try:
        return SCHEMES[name]()
    except KeyError:
        raise ConfigError(f"unknown scheme {name!r}; known: {sorted(SCHEMES)}") from None


def implementation(name: str):
    try:
        return IMPLEMENTATIONS[name]()
    except KeyError:
        raise ConfigError(f"unknown implementation {name!r}; known: {sorted(IMPLEMENTATIONS)}") from None


def implementation_for(scheme_name: str):
    try:
        return implementation(CASE_STUDY_IMPLS[scheme_name])
    except KeyError:
        raise ConfigError(f"scheme {scheme_name!r} has no case-study implementation; "
                          f"choose from {sorted(CASE_STUDY_IMPLS)}") from None
