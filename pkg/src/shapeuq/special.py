"""Integer-order Bessel and Hankel functions of real argument.

J_m is computed by Miller's downward recurrence normalised with the
Neumann identity ``1 = J_0 + 2 sum J_2k``; Y_0 and Y_1 come from the
Neumann series in the (already normalised) J's and Y_m for m >= 2 from the
stable upward recurrence.  Accuracy is ~1e-13 relative for orders up to a
few hundred and 0 < x <= 500.
"""

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_BIG = 1e250


def _start_order(order_max, xmax):
    n = max(order_max, int(np.ceil(xmax))) + 30 + int(12 * np.cbrt(max(xmax, 1.0)))
    return n + (n % 2)


def bessel_jy(order_max, x, need_y=True):
    """Return ``(J, Y)`` with ``J[m] = J_m(x)`` for ``m = 0..order_max``.

    ``x`` may be any array of non-negative reals; the result has shape
    ``(order_max + 1,) + x.shape``.  ``Y`` is ``None`` when ``need_y`` is
    false; it is ``-inf`` at ``x == 0``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    if np.any(xf < 0) or not np.all(np.isfinite(xf)):
        raise ValueError("bessel_jy needs finite non-negative arguments")
    mmax = max(int(order_max), 1)
    zero = xf == 0.0
    xs = np.where(zero, 1.0, xf)

    nstart = _start_order(mmax, float(xs.max(initial=0.0)))
    J = np.zeros((mmax + 1, xs.size))
    # running sums of the unnormalised sequence
    norm = np.zeros(xs.size)
    s_y0 = np.zeros(xs.size)
    s_y1 = np.zeros(xs.size)

    jp1 = np.zeros(xs.size)
    jm = np.full(xs.size, 1e-300)
    for m in range(nstart, 0, -1):
        if m <= mmax:
            J[m] = jm
        if m % 2 == 0:
            kk = m // 2
            norm += 2.0 * jm
            s_y0 += (-1) ** kk * jm / kk
        else:
            kk = (m - 1) // 2
            if kk >= 1:
                s_y1 += (-1) ** kk * m * jm / (kk * (kk + 1))
        jm1 = (2.0 * m / xs) * jm - jp1
        jp1, jm = jm, jm1
        big = np.abs(jm) > _BIG
        if np.any(big):
            scale = np.where(big, 1.0 / _BIG, 1.0)
            jm = jm * scale
            jp1 = jp1 * scale
            J *= scale
            norm *= scale
            s_y0 *= scale
            s_y1 *= scale
    J[0] = jm
    norm += jm
    J /= norm
    s_y0 /= norm
    s_y1 /= norm

    J[:, zero] = 0.0
    J[0, zero] = 1.0
    out_shape = (order_max + 1,) + shape
    if not need_y:
        return J[: order_max + 1].reshape(out_shape), None

    logterm = np.log(xs / 2.0) + EULER_GAMMA
    Y = np.empty((mmax + 1, xs.size))
    Y[0] = (2.0 / np.pi) * (logterm * J[0] - 2.0 * s_y0)
    Y[1] = (2.0 / np.pi) * (-J[0] / xs + (logterm - 1.0) * J[1] - s_y1)
    for m in range(1, mmax):
        Y[m + 1] = (2.0 * m / xs) * Y[m] - Y[m - 1]
    Y[:, zero] = -np.inf
    return (J[: order_max + 1].reshape(out_shape),
            Y[: order_max + 1].reshape(out_shape))


def bessel_j(order_max, x):
    return bessel_jy(order_max, x, need_y=False)[0]


def hankel1(order_max, x):
    """H^(1)_m(x) = J_m(x) + i Y_m(x) for ``m = 0..order_max``."""
    J, Y = bessel_jy(order_max, x)
    return J + 1j * Y


def derivative(F):
    """Derivative of a cylinder-function table ``F[m]`` (orders 0..M-1 returned).

    Uses ``C_m' = (C_{m-1} - C_{m+1}) / 2`` with ``C_{-1} = -C_1``; the
    table must contain one order more than is wanted.
    """
    F = np.asarray(F)
    D = np.empty_like(F[:-1])
    D[0] = -F[1]
    D[1:] = 0.5 * (F[:-2] - F[2:])
    return D


def signed_orders(F, m):
    """Evaluate ``C_m`` for signed integer orders from a table of ``C_|m|``."""
    m = np.asarray(m)
    am = np.abs(m)
    sign = np.where((m < 0) & (am % 2 == 1), -1.0, 1.0)
    return sign.reshape(sign.shape + (1,) * (F.ndim - 1)) * F[am]
