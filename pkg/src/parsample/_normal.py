"""Inverse standard-normal CDF, compiled.

Rational approximations in three ranges (central, tail, far tail), the
classic Cephes ``ndtri``.  Shared by the array streams and the compiled
engine so both turn the same uniforms into the same normals.
"""

import math

import numpy as np
from numba import njit, vectorize

_S2PI = 2.50662827463100050242
_EXPM2 = 0.13533528323661269189

_P0 = np.array([
    -5.99633501014107895267e1, 9.80010754185999661536e1, -5.66762857469070293439e1,
    1.39312609387279679503e1, -1.23916583867381258016e0])
_Q0 = np.array([
    1.95448858338141759834e0, 4.67627912898881538453e0, 8.63602421390890590575e1,
    -2.25462687854119370527e2, 2.00260212380060660359e2, -8.20372256168333339912e1,
    1.59056225126211695515e1, -1.18331621121330003142e0])
_P1 = np.array([
    4.05544892305962419923e0, 3.15251094599893866154e1, 5.71628192246421288162e1,
    4.40805073893200834700e1, 1.46849561928858024014e1, 2.18663306850790267539e0,
    -1.40256079171354495875e-1, -3.50424626827848203418e-2, -8.57456785154685413611e-4])
_Q1 = np.array([
    1.57799883256466749731e1, 4.53907635128879210584e1, 4.13172038254672030440e1,
    1.50425385692907503408e1, 2.50464946208309415979e0, -1.42182922854787788574e-1,
    -3.80806407691578277194e-2, -9.33259480895457427372e-4])
_P2 = np.array([
    3.23774891776946035970e0, 6.91522889068984211695e0, 3.93881025292474443415e0,
    1.33303460815807542389e0, 2.01485389549179081538e-1, 1.23716634817820021358e-2,
    3.01581553508235416007e-4, 2.65806974686737550832e-6, 6.23974539184983293730e-9])
_Q2 = np.array([
    6.02427039364742014255e0, 3.67983563856160859403e0, 1.37702099489081330271e0,
    2.16236993594496635890e-1, 1.34204006088543189037e-2, 3.28014464682127739104e-4,
    2.89247864745380683936e-6, 6.79019408009981274425e-9])


@njit(cache=True)
def _polevl(x, c):
    s = c[0]
    for i in range(1, c.shape[0]):
        s = s * x + c[i]
    return s


@njit(cache=True)
def _p1evl(x, c):
    s = x + c[0]
    for i in range(1, c.shape[0]):
        s = s * x + c[i]
    return s


@njit(cache=True)
def ndtri_scalar(y0):
    if y0 == 0.0:
        return -np.inf
    if y0 == 1.0:
        return np.inf
    if not 0.0 < y0 < 1.0:
        return np.nan
    neg = True
    y = y0
    if y > 1.0 - _EXPM2:
        y = 1.0 - y
        neg = False
    if y > _EXPM2:
        y = y - 0.5
        y2 = y * y
        x = y + y * (y2 * _polevl(y2, _P0) / _p1evl(y2, _Q0))
        return x * _S2PI
    x = math.sqrt(-2.0 * math.log(y))
    x0 = x - math.log(x) / x
    z = 1.0 / x
    if x < 8.0:
        x1 = z * _polevl(z, _P1) / _p1evl(z, _Q1)
    else:
        x1 = z * _polevl(z, _P2) / _p1evl(z, _Q2)
    x = x0 - x1
    return -x if neg else x


@vectorize(["float64(float64)"], cache=True)
def ndtri(u):
    """Elementwise inverse normal CDF."""
    return ndtri_scalar(u)
