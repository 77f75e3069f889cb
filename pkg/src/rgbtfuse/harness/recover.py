"""Global translation recovery by warping the visible map onto the thermal one."""
import numpy as np

from .._validation import check_feature_map, check_same_shape
from ..align import OffsetField, grid_sample
from ..exceptions import DegenerateSceneError


def warp_cost(visible, thermal, ox, oy):
    """Mean squared difference after sampling ``visible`` at offset (ox, oy)."""
    warped = grid_sample(visible, OffsetField.constant(ox, oy, visible.shape[1:]))
    return float(np.mean((warped - thermal) ** 2))


def _parabola_vertex(f_minus, f0, f_plus, step):
    curvature = f_minus - 2.0 * f0 + f_plus
    if curvature <= 0:
        return 0.0
    delta = step * (f_minus - f_plus) / (2.0 * curvature)
    return float(np.clip(delta, -step, step))


def recover_shift(visible, thermal, search_radius=4.0, coarse_step=0.5):
    """Estimate the translation that carries ``visible`` onto ``thermal``.

    A coarse grid of constant offsets in ``[-search_radius, search_radius]^2``
    is scored by :func:`warp_cost`; the best point is refined by a 1D
    parabola through its neighbours on each axis. An exact zero-cost coarse
    match is returned unrefined.

    Returns
    -------
    (dx, dy) : tuple of float
        Displacement of the thermal content relative to the visible content.

    Raises
    ------
    DegenerateSceneError
        If every candidate offset has the same cost.
    """
    visible = check_feature_map(visible, "visible")
    thermal = check_feature_map(thermal, "thermal")
    check_same_shape(visible, thermal, ("visible", "thermal"))
    if not search_radius >= coarse_step > 0:
        raise ValueError("need search_radius >= coarse_step > 0")

    n = int(np.floor(search_radius / coarse_step + 1e-9))
    grid = coarse_step * np.arange(-n, n + 1)
    costs = np.array([[warp_cost(visible, thermal, ox, oy) for ox in grid] for oy in grid])
    spread = costs.max() - costs.min()
    if spread <= 1e-14 * max(1.0, costs.max()):
        raise DegenerateSceneError("alignment cost is flat over the search window")

    iy, ix = np.unravel_index(np.argmin(costs), costs.shape)
    ox, oy = grid[ix], grid[iy]
    f0 = costs[iy, ix]
    if f0 > 0:
        h = coarse_step
        ox += _parabola_vertex(
            warp_cost(visible, thermal, ox - h, oy), f0, warp_cost(visible, thermal, ox + h, oy), h
        )
        oy += _parabola_vertex(
            warp_cost(visible, thermal, grid[ix], oy - h), f0, warp_cost(visible, thermal, grid[ix], oy + h), h
        )
    # Sampling visible at +o matches thermal when the content moved by -o.
    return float(-ox) + 0.0, float(-oy) + 0.0
