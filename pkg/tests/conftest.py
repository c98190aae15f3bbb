"""Shared hypothesis strategies and settings for the suite."""

import hypothesis
import numpy as np
from hypothesis import strategies as st

from structmc import Alphabet, StructureSpec

hypothesis.settings.register_profile(
    "suite", deadline=None, max_examples=40, derandomize=True
)
hypothesis.settings.load_profile("suite")

BINARY = Alphabet.finite((0.0, 1.0))
SYMMETRIC = Alphabet.interval(-1.0, 1.0)


@st.composite
def small_specs(draw, bounded=False, finite_only=False, max_dim=6):
    """StructureSpec with desk-scale dimensions and s >= 1 on both sides."""
    n = draw(st.integers(2, max_dim))
    m = draw(st.integers(2, max_dim))
    k_n = draw(st.integers(1, min(n, 3)))
    k_m = draw(st.integers(1, min(m, 3)))
    s_n = draw(st.integers(1, k_n))
    s_m = draw(st.integers(1, k_m))
    if finite_only:
        alph_n = alph_m = BINARY
    else:
        alph_n = draw(st.sampled_from([BINARY, SYMMETRIC]))
        alph_m = draw(st.sampled_from([BINARY, SYMMETRIC]))
    return StructureSpec(
        n=n, m=m, k_n=k_n, k_m=k_m, s_n=s_n, s_m=s_m,
        alphabet_n=alph_n, alphabet_m=alph_m,
        b_max=1.0, theta_mx=float(max(1.0, s_n * s_m)), bounded=bounded,
    )


def member_of(spec, rng):
    """Draw (x, b, z) inside the class described by spec."""
    def factor(rows, k, s, alph):
        a = np.zeros((rows, k))
        for i in range(rows):
            support = rng.choice(k, size=s, replace=False)
            if alph.kind == "finite":
                vals = rng.choice(np.asarray(alph.values), size=s)
            else:
                vals = rng.uniform(alph.lo, alph.hi, size=s)
            a[i, support] = vals
        return a

    x = factor(spec.n, spec.k_n, spec.s_n, spec.alphabet_n)
    z = factor(spec.m, spec.k_m, spec.s_m, spec.alphabet_m)
    hi = spec.b_max if spec.bounded else 1.0
    b = rng.uniform(-hi, hi, size=(spec.k_n, spec.k_m))
    return x, b, z
