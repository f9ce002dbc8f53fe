"""Square trees of prescribed dimension, box counting, and thin corridors."""
from flexweld.core_geom import rectangle_quad
from flexweld.dimension import (box_dim, connect_squares, layout_in_rectangle, mattila_build,
                                natural_measure, conservation_error, s_additive_squares,
                                separation_check, squares_as_rects, tree_scales)

for s in (1.2, 1.5, 1.8):
    tree = mattila_build(s, 4)
    ll, side = tree.leaves()
    rep = box_dim(squares_as_rects(ll, side), tree_scales(tree))
    meas = natural_measure(tree)
    print(f"s={s}: {len(ll)} leaves, box dim {rep.estimate:.3f} (r2 {rep.fit_r2:.4f}), "
          f"sum error {tree.checks()['additivity_error']:.1e}, mass error {conservation_error(tree, meas):.1e}")

L = s_additive_squares(1.5)
print("layout:", L.n, "squares per anchor, side", L.x, L.checks())
print("separation:", {k: v for k, v in separation_check(L).items() if k in ("slope_log_max_ratio", "passes")})

lay, x = layout_in_rectangle(s_additive_squares(1.5, 4), 1.5)
for s in (1.8, 1.5, 1.2):
    try:
        cor = connect_squares(rectangle_quad(1.5), lay[:6], x, 1e-3, s)
        print(f"corridors at s={s}: width {cor.width:.2g}, cost {cor.cost:.2g}")
    except ValueError as exc:
        print(f"corridors at s={s}:", exc)
