"""Pure-NumPy reference implementations of the dense assembly kernels.

These are the fallback backend; np_spectra._kernels selects the compiled
Cython versions when available.  Both backends must agree to close to
machine precision (see tests/test_kernels_backends.py).
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def np_kernel_matrix(nodes, normals, curvatures, weights):
    """Nystrom matrix of the Neumann-Poincare operator.

    entries[i, j] = (1/2pi) <x_i - x_j, nu_i> / |x_i - x_j|^2 * w_j,
    with the smooth diagonal limit kappa_i / (4pi) * w_i.
    """
    diff = nodes[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(r2, 1.0)
    dot = np.einsum("ijk,ik->ij", diff, normals)
    kernel = dot / (TWO_PI * r2)
    np.fill_diagonal(kernel, curvatures / (2.0 * TWO_PI))
    return kernel * weights[None, :]


def log_remainder_matrix(nodes, speed, theta):
    """Smooth remainder of the 2D log kernel after Kress splitting.

    Returns L[i, j] = (1/2) log(|x_i - x_j|^2 / (4 sin^2((t_i - t_j)/2)))
    with the diagonal limit log|x'(t_i)|.
    """
    diff = nodes[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    dt = theta[:, None] - theta[None, :]
    s2 = 4.0 * np.sin(0.5 * dt) ** 2
    np.fill_diagonal(r2, 1.0)
    np.fill_diagonal(s2, 1.0)
    out = 0.5 * np.log(r2 / s2)
    np.fill_diagonal(out, np.log(speed))
    return out


def first_variation_matrix(nodes, tangents, normals, curvatures, weights, h, dh, d2h):
    """First-variation kernel of the Neumann-Poincare operator.

    Assembles (1/2pi) * [K_{h,0} F_{h,1} + K_{h,1}](x_i, x_j) * w_j where
    h, dh, d2h are the field and its first/second arclength derivatives at
    the nodes.  The paper-orientation curvature tau (X'' = tau nu) equals
    minus the geometric curvature stored on the mesh; diagonal limits:

        F_h      -> kappa h          K_{h,0} -> kappa / 2
        F_{h,1}  -> -2 kappa h       K_{h,1} -> kappa^2 h - h''/2

    so the combined kernel tends to -h''/2 on the diagonal.
    """
    kappa = curvatures
    tau = -kappa

    diff = nodes[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(r2, 1.0)
    inv_r2 = 1.0 / r2

    dot_nu_i = np.einsum("ijk,ik->ij", diff, normals)  # <x_i - x_j, nu_i>
    dot_t_i = np.einsum("ijk,ik->ij", diff, tangents)  # <x_i - x_j, T_i>

    # hv[i] = h_i nu_i ; difference pattern h_i nu_i - h_j nu_j
    hnu = h[:, None] * normals
    hnu_diff = hnu[:, None, :] - hnu[None, :, :]
    dot_hnu_x = np.einsum("ijk,ijk->ij", diff, hnu_diff)  # <x_i-x_j, h_i nu_i - h_j nu_j>
    dot_hnu_nu = np.einsum("ijk,ik->ij", hnu_diff, normals)  # <..., nu_i>

    k0 = dot_nu_i * inv_r2
    np.fill_diagonal(k0, 0.5 * kappa)

    fh = dot_hnu_x * inv_r2
    np.fill_diagonal(fh, kappa * h)

    fh1 = -2.0 * fh + (tau * h)[:, None] - (tau * h)[None, :]

    k1 = (dot_hnu_nu - (tau * h)[:, None] * dot_nu_i - dh[:, None] * dot_t_i) * inv_r2
    np.fill_diagonal(k1, kappa**2 * h - 0.5 * d2h)

    combined = k0 * fh1 + k1
    np.fill_diagonal(combined, -0.5 * d2h)
    return combined * weights[None, :] / TWO_PI


def cross_block_matrices(nodes_a, normals_a, weights_a, nodes_b, normals_b, weights_b):
    """Off-diagonal blocks of the two-body operator: the normal derivative
    of each component's single layer evaluated on the other component.

    Returns (A_from_b, B_from_a): A_from_b[i, j] couples a density on body
    b to body a.  The kernels are smooth (bodies disjoint).
    """
    diff = nodes_a[:, None, :] - nodes_b[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    ka = np.einsum("ijk,ik->ij", diff, normals_a) / (TWO_PI * r2) * weights_b[None, :]
    kb = -np.einsum("ijk,jk->ij", diff, normals_b) / (TWO_PI * r2) * weights_a[:, None]
    return ka, kb.T


def cross_log_matrix(nodes_a, nodes_b, weights_b):
    """Single-layer coupling block: -(1/2pi) log|x_i - y_j| * w_j."""
    diff = nodes_a[:, None, :] - nodes_b[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    return -np.log(r2) / (2.0 * TWO_PI) * weights_b[None, :]


def segment_intersections(nodes):
    """Indices (i, j) of non-adjacent closed-polyline segments that cross.

    O(N^2) pair test; adequate for N <= 2048.
    """
    n = nodes.shape[0]
    p = nodes
    q = np.roll(nodes, -1, axis=0)
    d = q - p

    # orientation of segment j endpoints relative to segment i's line
    def cross(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (
            a[..., 1] - o[..., 1]
        ) * (b[..., 0] - o[..., 0])

    pi = p[:, None, :]
    qi = q[:, None, :]
    pj = p[None, :, :]
    qj = q[None, :, :]
    d1 = cross(pi, qi, pj)
    d2 = cross(pi, qi, qj)
    d3 = cross(pj, qj, pi)
    d4 = cross(pj, qj, qi)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)

    idx = np.arange(n)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (
        np.abs(idx[:, None] - idx[None, :]) == n - 1
    )
    hit &= ~adjacent
    ii, jj = np.nonzero(np.triu(hit, 1))
    return list(zip(ii.tolist(), jj.tolist()))
