"""
Algorithm configuration for the SBP engine.
Centralizes all inference parameters and named profiles for easy customization.
"""

import copy
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import DCSBP_COMBINE_THRESHOLD, DEFAULT_COLLECTIVE_TIMEOUT, DEFAULT_SEED

# Default algorithm configuration
DEFAULT_SBP_CONFIG = {
    # Block merge phase
    'block_merge': {
        'merge_proposals_per_community': 10,  # x: proposals evaluated per community
        'community_reduction_rate': 0.5,      # next target = floor(C * rate) before the bracket exists
    },

    # MCMC phase
    'mcmc': {
        'mcmc_max_sweeps': 100,
        'convergence_threshold': 1e-4,        # t once the golden bracket exists
        'early_convergence_threshold': 1e-3,  # t before the golden bracket exists
        'beta': 3.0,
        'hybrid_high_degree_fraction': 0.07,
        'workers': 1,
    },

    # Distributed runs
    'distributed': {
        'combine_threshold': DCSBP_COMBINE_THRESHOLD,
        'debug_checks': True,
        'collective_timeout': DEFAULT_COLLECTIVE_TIMEOUT,
    },

    'run': {
        'seed': DEFAULT_SEED,
    },
}

# Named profiles (overlaid on the defaults)
SBP_PROFILES = {
    'fast': {
        'block_merge': {
            'merge_proposals_per_community': 4,
        },
        'mcmc': {
            'mcmc_max_sweeps': 10,
            'convergence_threshold': 1e-3,
            'early_convergence_threshold': 1e-2,
        },
    },

    'thorough': {
        'block_merge': {
            'merge_proposals_per_community': 20,
        },
        'mcmc': {
            'mcmc_max_sweeps': 300,
            'convergence_threshold': 1e-5,
        },
    },

    'sequential': {
        'mcmc': {
            'hybrid_high_degree_fraction': 1.0,
            'workers': 1,
        },
    },
}

PROFILE_DESCRIPTIONS = {
    'default': 'Graph Challenge baseline values (x=10, beta=3, t=1e-4, 100 sweeps)',
    'fast': 'Few proposals and sweeps for smoke tests and quick sweeps',
    'thorough': 'More proposals and sweeps, tighter convergence',
    'sequential': 'Hybrid sweep disabled; every vertex processed in order',
}


class SbpConfig(BaseModel):
    """Validated, immutable inference settings"""

    model_config = ConfigDict(frozen=True)

    merge_proposals_per_community: int = Field(10, ge=1)
    community_reduction_rate: float = Field(0.5, gt=0.0, lt=1.0)
    mcmc_max_sweeps: int = Field(100, ge=1)
    convergence_threshold: float = Field(1e-4, gt=0.0, le=1.0)
    early_convergence_threshold: float = Field(1e-3, gt=0.0, le=1.0)
    beta: float = Field(3.0, gt=0.0)
    hybrid_high_degree_fraction: float = Field(0.07, ge=0.0, le=1.0)
    workers: int = Field(1, ge=1)
    combine_threshold: int = Field(DCSBP_COMBINE_THRESHOLD, ge=1)
    debug_checks: bool = True
    collective_timeout: float = Field(DEFAULT_COLLECTIVE_TIMEOUT, gt=0.0)
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2 ** 64)

    @classmethod
    def from_profile(cls, profile: str = 'default', **overrides: Any) -> 'SbpConfig':
        """Flatten a profile's sections and apply keyword overrides"""
        flat = {}
        for section in get_sbp_config(profile).values():
            flat.update(section)
        flat.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**flat)

    def with_overrides(self, **overrides: Any) -> 'SbpConfig':
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SbpConfig(**values)


def get_sbp_config(profile: str = 'default') -> Dict[str, Dict[str, Any]]:
    """
    Get sectioned configuration for a named profile

    Args:
        profile: Profile name ('default', 'fast', 'thorough', 'sequential')

    Returns:
        Configuration dictionary, one sub-dictionary per section
    """
    config = copy.deepcopy(DEFAULT_SBP_CONFIG)
    if profile == 'default':
        return config

    if profile not in SBP_PROFILES:
        raise ValueError(f"Unknown profile: {profile}. "
                         f"Available profiles: {', '.join(list_available_profiles())}")

    for section_name, section in SBP_PROFILES[profile].items():
        config.setdefault(section_name, {}).update(section)
    return config


def list_available_profiles() -> list:
    """Get list of all available configuration profiles"""
    return ['default'] + list(SBP_PROFILES.keys())


def get_profile_description(profile: str) -> str:
    """Get human-readable description of a profile"""
    return PROFILE_DESCRIPTIONS.get(profile, 'Custom profile')


def parse_params_text(text: str, source: Optional[str] = None) -> Dict[str, str]:
    """Parse key=value lines (blank lines and # comments ignored)"""
    from ..errors import GraphFormatError

    params = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            label = f"{source}: " if source else ''
            raise GraphFormatError(f"{label}expected key=value, got {raw!r}", line_number)
        key, value = line.split('=', 1)
        params[key.strip()] = value.strip()
    return params
