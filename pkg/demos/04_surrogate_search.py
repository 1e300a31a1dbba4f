"""A complete search run against a built-in synthetic oracle.

The surrogate scores each candidate by positional match against a
hidden target sequence, so a run takes seconds instead of GPU-days and
the expected winner is known.  Two variants are contrasted: the
baseline loop, and full inversion on the deceptive-trap oracle where
the all-identity network is a near-optimal decoy the baseline tends to
lock onto.
"""

from ased import (
    EvaluatorPool,
    SurrogateEvaluator,
    SurrogateSpec,
    default_library,
    dispatch,
    format_layers,
    profile,
    run,
)

library = default_library()
target = tuple(library.tokens.index(t) for t in ("c3", "c5", "m2", "c3", "m3", "c1"))
print(f"hidden target: {format_layers(target, library)}")


def search(kind: str, variant: str, seed: int):
    config = profile(
        "modified", library,
        n_init=4, t_max=6, k=60, k_s=8, k_init=120,
        variant=variant, seed=seed,
    )
    spec = SurrogateSpec(kind, target)
    with EvaluatorPool([SurrogateEvaluator(spec, library)]) as pool:
        outcome = run(config, lambda reqs: dispatch(reqs, pool))
    return outcome


for kind, variant in [("target_match", "baseline"), ("deceptive_trap", "full_inversion")]:
    print(f"\n--- oracle {kind}, variant {variant} ---")
    outcome = search(kind, variant, seed=11)
    for st in outcome.history:
        print(f"  iter {st.iteration}: depth {st.depth:2d}  "
              f"best acc {st.max_accuracy:.3f}  median {st.median_accuracy:.3f}  "
              f"norm {st.mean_l2_norm:.3f}")
    final = format_layers(outcome.final_architecture.layers, library)
    print(f"  stop: {outcome.stop_reason}; final architecture: {final}")
    if outcome.archived_architectures:
        alts = [format_layers(a.layers, library) for a in outcome.archived_architectures]
        print(f"  archived pre-inversion candidates: {alts}")
