"""Pure-numpy implementations of the hot kernels.

Convolutions go through im2col views plus einsum; the error function is the
same Cody-style rational approximation as the compiled backend, evaluated
region-by-region with boolean masks. Backends agree to rounding (about one
ulp for erfc, ~1e-13 for convolutions), not bitwise.
"""

import numpy as np

# Cody rational-approximation coefficients for erf/erfc (double precision).
_A = (3.16112374387056560e00, 1.13864154151050156e02,
      3.77485237685302021e02, 3.20937758913846947e03,
      1.85777706184603153e-1)
_B = (2.36012909523441209e01, 2.44024637934444173e02,
      1.28261652607737228e03, 2.84423683343917062e03)
_C = (5.64188496988670089e-1, 8.88314979438837594e00,
      6.61191906371416295e01, 2.98635138197400131e02,
      8.81952221241769090e02, 1.71204761263407058e03,
      2.05107837782607147e03, 1.23033935479799725e03,
      2.15311535474403846e-8)
_D = (1.57449261107098347e01, 1.17693950891312499e02,
      5.37181101862009858e02, 1.62138957456669019e03,
      3.29079923573345963e03, 4.36261909014324716e03,
      3.43936767414372164e03, 1.23033935480374942e03)
_P = (3.05326634961232344e-1, 3.60344899949804439e-1,
      1.25781726111229246e-1, 1.60837851487422766e-2,
      6.58749161529837803e-4, 1.63153871373020978e-2)
_Q = (2.56852019228982242e00, 1.87295284992346047e00,
      5.27905102951428412e-1, 6.05183413124413191e-2,
      2.33520497626869185e-3)
_RSQRT_PI = 5.6418958354775628695e-1
_THRESH = 0.46875
_HUGE = 26.543


def erfc(x):
    """Complementary error function, elementwise, |abs error| < 1e-15."""
    x = np.asarray(x, dtype=np.float64)
    y = np.abs(x)
    out = np.empty_like(y)

    m1 = y <= _THRESH
    if m1.any():
        xs = x[m1]
        z = xs * xs
        num = _A[4] * z
        den = z
        for i in range(3):
            num = (num + _A[i]) * z
            den = (den + _B[i]) * z
        out[m1] = 1.0 - xs * (num + _A[3]) / (den + _B[3])

    m2 = (y > _THRESH) & (y <= 4.0)
    if m2.any():
        ys = y[m2]
        num = _C[8] * ys
        den = ys
        for i in range(7):
            num = (num + _C[i]) * ys
            den = (den + _D[i]) * ys
        r = (num + _C[7]) / (den + _D[7])
        ysq = np.floor(ys * 16.0) / 16.0
        r = r * np.exp(-ysq * ysq) * np.exp(-(ys - ysq) * (ys + ysq))
        out[m2] = np.where(x[m2] < 0.0, 2.0 - r, r)

    m3 = y > 4.0
    if m3.any():
        ys = y[m3]
        z = 1.0 / (ys * ys)
        num = _P[5] * z
        den = z
        for i in range(4):
            num = (num + _P[i]) * z
            den = (den + _Q[i]) * z
        r = z * (num + _P[4]) / (den + _Q[4])
        r = (_RSQRT_PI - r) / ys
        ysq = np.floor(ys * 16.0) / 16.0
        r = r * np.exp(-ysq * ysq) * np.exp(-(ys - ysq) * (ys + ysq))
        r = np.where(ys >= _HUGE, 0.0, r)
        out[m3] = np.where(x[m3] < 0.0, 2.0 - r, r)

    return out


def _patch_view(xp, ho, wo, stride, kh, kw):
    n, c, _, _ = xp.shape
    s = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (n, c, ho, wo, kh, kw),
        (s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3]),
        writeable=False)


def conv2d_fwd(x, w, stride, pad):
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    view = _patch_view(xp, ho, wo, stride, kh, kw)
    return np.einsum("nchwab,ocab->nohw", view, w, optimize=True)


def conv2d_grad_weight(gy, x, stride, pad, kh, kw):
    """Gradient with respect to the (co, ci, kh, kw) kernel."""
    _, _, ho, wo = gy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    view = _patch_view(xp, ho, wo, stride, kh, kw)
    return np.einsum("nohw,nchwab->ocab", gy, view, optimize=True)


def conv2d_grad_input(gy, w, stride, pad, h, wd):
    """Gradient with respect to the (unpadded) input."""
    n, co, ho, wo = gy.shape
    _, ci, kh, kw = w.shape
    hp, wp = h + 2 * pad, wd + 2 * pad
    dil_h, dil_w = (ho - 1) * stride + 1, (wo - 1) * stride + 1
    gyd = np.zeros((n, co, dil_h, dil_w))
    gyd[:, :, ::stride, ::stride] = gy
    top = kh - 1
    left = kw - 1
    bottom = hp + kh - 1 - top - dil_h
    right = wp + kw - 1 - left - dil_w
    gz = np.pad(gyd, ((0, 0), (0, 0), (top, bottom), (left, right)))
    view = _patch_view(gz, hp, wp, 1, kh, kw)
    wflip = w[:, :, ::-1, ::-1]
    gxp = np.einsum("nohwab,ocab->nchw", view, wflip, optimize=True)
    if pad:
        return np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + wd])
    return gxp
