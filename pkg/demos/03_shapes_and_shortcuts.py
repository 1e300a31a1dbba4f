"""Tracing feature-map shapes, pool demotion, and shortcut wiring.

Convolutions here preserve spatial dimensions (zero padding), so only
pooling shrinks the map: stride-2 max pooling floors, kernel-3 pooling
ceils.  A pool that would produce an empty map is demoted to identity
and logged.  Shortcut generators produce residual-style or semi-dense
segment endpoints, and each segment replays the pools its span crosses
so the branch lands with matching spatial shape.
"""

from ased import (
    CandidateArchitecture,
    default_library,
    generate_residual,
    generate_semi_dense,
    parameter_count,
    parse_layers,
    trace_shapes,
)

library = default_library()

text = "c3-m2-c5-m3-a3-c1"
layers = parse_layers(text, library)
arch = CandidateArchitecture(layers, (), channels=32, input_shape=(32, 32, 3))
trace = trace_shapes(arch, library)
print(f"{text} on 32x32x3:")
print(f"  input: {trace.input_size[0]}x{trace.input_size[1]}")
for depth, (h, w) in enumerate(trace.shapes):
    print(f"  {library.tokens[layers[depth]]:>5}: {h}x{w}")

# Seven pools on a 28-pixel input run out of pixels; the late ones demote.
crowded = CandidateArchitecture(
    parse_layers("m2-m2-m2-m2-m2-m2-m2", library), (), 32, (28, 28, 1))
t2 = trace_shapes(crowded, library)
print(f"\nseven stride-2 pools on 28x28: final {t2.shapes[-1][0]}x{t2.shapes[-1][1]}, "
      f"pools demoted to identity at positions {list(t2.substitutions)}")

for name, pairs in [("residual", generate_residual(6, 2)),
                    ("semi-dense", generate_semi_dense(6, 2))]:
    print(f"\n{name} pattern over 6 layers, span 2: {list(pairs)}")

pairs = generate_residual(len(layers), 2)
wired = CandidateArchitecture(layers, pairs, channels=32, input_shape=(32, 32, 3))
trace = trace_shapes(wired, library)
print(f"\nshortcuts on {text}: {list(pairs)}")
for s, e in pairs:
    replay = trace.replay_for((s, e))
    desc = ", ".join(library.tokens[j] for j in replay) or "none"
    print(f"  segment {s}->{e} replays pools: {desc}")

print(f"\ntrainable parameters at 32 channels, 10 classes: "
      f"{parameter_count(wired, library, num_classes=10):,}")
gray = CandidateArchitecture(layers, pairs, 32, (28, 28, 1))
print(f"same stack on 1-channel input: "
      f"{parameter_count(gray, library, 10):,} (only the first convolution changes)")
