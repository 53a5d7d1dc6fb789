"""Hot path-simulation loops.

Written in Cython's pure-Python mode: setup.py compiles this file to the
extension ``mtlab._ckernels``; imported directly it runs as plain Python.
Every routine processes a block of paths ``start .. start+count`` and draws
all randomness from a counter-based stream keyed by (seed, path index), so a
path's numbers do not depend on how paths are split into blocks.

Output column layouts are listed in ``RIESZ_COLUMNS`` etc.
"""
import cython

if cython.compiled:
    from cython.cimports.libc.math import atan2, cos, exp, fabs, floor, fmod, log, sin, sqrt
else:
    from math import atan2, cos, exp, fabs, floor, fmod, log, sin, sqrt

M64 = cython.declare(cython.ulonglong, 0xFFFFFFFFFFFFFFFF)
MIX1 = cython.declare(cython.ulonglong, 0xBF58476D1CE4E5B9)
MIX2 = cython.declare(cython.ulonglong, 0x94D049BB133111EB)
GOLDEN = cython.declare(cython.ulonglong, 0x9E3779B97F4A7C15)
TWO_PI = cython.declare(cython.double, 6.283185307179586)
INV_2_53 = cython.declare(cython.double, 1.1102230246251565e-16)

RIESZ_COLUMNS = ("x0", "x1", "x2", "tau", "censored", "fwd0", "fwd1", "fwd2",
                 "rev0", "rev1", "rev2", "j2", "steps", "regen")
BA_COLUMNS = ("x0", "x1", "fwd0", "fwd1", "rev0", "rev1", "res0", "res1", "steps")
ITO_COLUMNS = ("residual", "tau", "censored", "steps")
EXIT_COLUMNS = ("tau", "censored", "steps")
DRIFT_COLUMNS = ("num", "den", "censored", "steps")
OCC_COLUMNS = ("occupation", "tau", "censored", "steps")


@cython.cfunc
@cython.exceptval(check=False)
@cython.inline
def _mix(z: cython.ulonglong) -> cython.ulonglong:
    c1: cython.ulonglong = MIX1
    c2: cython.ulonglong = MIX2
    m: cython.ulonglong = M64
    z = ((z ^ (z >> 30)) * c1) & m
    z = ((z ^ (z >> 27)) * c2) & m
    return z ^ (z >> 31)


def splitmix(z):
    """SplitMix64 finalizer (exposed for tests)."""
    return _mix(z)


@cython.cclass
class Stream:
    """Counter-based random stream for one path."""

    key: cython.ulonglong
    ctr: cython.ulonglong
    spare: cython.double
    has_spare: cython.int

    def __init__(self, seed, index):
        g: cython.ulonglong = GOLDEN
        m: cython.ulonglong = M64
        s: cython.ulonglong = seed & M64
        i: cython.ulonglong = index & M64
        self.key = _mix(s ^ _mix((i + g) & m))
        self.ctr = 0
        self.spare = 0.0
        self.has_spare = 0

    @cython.ccall
    @cython.exceptval(check=False)
    def uniform(self) -> cython.double:
        g: cython.ulonglong = GOLDEN
        m: cython.ulonglong = M64
        z: cython.ulonglong = _mix((self.key + self.ctr * g) & m)
        self.ctr += 1
        return ((z >> 11) + 0.5) * INV_2_53

    @cython.ccall
    @cython.exceptval(check=False)
    def normal(self) -> cython.double:
        u1: cython.double
        u2: cython.double
        r: cython.double
        if self.has_spare:
            self.has_spare = 0
            return self.spare
        u1 = self.uniform()
        u2 = self.uniform()
        r = sqrt(-2.0 * log(u1))
        self.spare = r * sin(TWO_PI * u2)
        self.has_spare = 1
        return r * cos(TWO_PI * u2)


@cython.cclass
class FieldTable:
    """Scalar field sum_t c_t basis_t(x) exp(-height * rate[mode_t]).

    ``eval`` fills ``g`` (gradient, chart/ambient coordinates), ``gy``
    (d/dheight of g), ``val`` and ``vy``; ``gy0`` uses ``rates0`` instead.
    """

    kind: cython.int
    dim: cython.int
    nterm: cython.int
    nmode: cython.int
    ti: cython.longlong[:, :]
    tf: cython.double[:, :]
    rates: cython.double[:]
    rates0: cython.double[:]
    grid: cython.double[:, :]
    grid2: cython.double[:, :]
    gx0: cython.double
    gdx: cython.double
    alpha0: cython.double
    alpha1: cython.double
    maxdeg: cython.int
    decay: cython.double[:]
    decay0: cython.double[:]
    h1: cython.double[:]
    h2: cython.double[:]
    d1: cython.double[:]
    d2: cython.double[:]
    px: cython.double[:]
    py: cython.double[:]
    pz: cython.double[:]
    g: cython.double[:]
    gy: cython.double[:]
    gy0: cython.double[:]
    val: cython.double
    vy: cython.double

    def __init__(self, kind, dim, ti, tf, rates, rates0, grid, grid2, gx0, gdx, alpha0, alpha1):
        import numpy as np
        self.kind = kind
        self.dim = dim
        self.ti = np.ascontiguousarray(ti, dtype=np.int64)
        self.tf = np.ascontiguousarray(tf, dtype=np.float64)
        self.nterm = self.ti.shape[0]
        self.rates = np.ascontiguousarray(rates, dtype=np.float64).reshape(-1)
        self.rates0 = np.ascontiguousarray(rates0, dtype=np.float64).reshape(-1)
        self.nmode = self.rates.shape[0]
        self.grid = np.ascontiguousarray(grid, dtype=np.float64)
        self.grid2 = np.ascontiguousarray(grid2, dtype=np.float64)
        self.gx0 = gx0
        self.gdx = gdx
        self.alpha0 = alpha0
        self.alpha1 = alpha1
        tia = np.asarray(ti).reshape(-1, 4)
        self.maxdeg = int(tia[:, :3].max()) + 2 if tia.size else 2
        n = max(self.nmode, 1)
        self.decay = np.zeros(n)
        self.decay0 = np.zeros(n)
        self.h1 = np.zeros(self.maxdeg + 1)
        self.h2 = np.zeros(self.maxdeg + 1)
        self.d1 = np.zeros(self.maxdeg + 1)
        self.d2 = np.zeros(self.maxdeg + 1)
        self.px = np.zeros(self.maxdeg + 1)
        self.py = np.zeros(self.maxdeg + 1)
        self.pz = np.zeros(self.maxdeg + 1)
        self.g = np.zeros(3)
        self.gy = np.zeros(3)
        self.gy0 = np.zeros(3)

    @cython.boundscheck(False)
    @cython.wraparound(False)
    @cython.cdivision(True)
    @cython.ccall
    @cython.exceptval(check=False)
    def eval(self, x: cython.double[:], height: cython.double, with0: cython.int):
        t: cython.int
        m: cython.int
        n: cython.int
        i: cython.int
        j: cython.int
        k: cython.int
        c: cython.double
        s: cython.double
        cc: cython.double
        ss: cython.double
        ph: cython.double
        dec: cython.double
        r: cython.double
        v: cython.double
        ga: cython.double
        gb: cython.double
        gc: cython.double
        u: cython.double
        w: cython.double
        sa: cython.double
        sb: cython.double
        row: cython.int
        idx: cython.int
        for m in range(self.nmode):
            self.decay[m] = exp(-height * self.rates[m])
            if with0:
                self.decay0[m] = exp(-height * self.rates0[m])
        for i in range(3):
            self.g[i] = 0.0
            self.gy[i] = 0.0
            self.gy0[i] = 0.0
        self.val = 0.0
        self.vy = 0.0
        if self.kind == 1:
            sa = sqrt(self.alpha0)
            sb = sqrt(self.alpha1)
            u = sa * x[0]
            self.h1[0] = 1.0
            self.h1[1] = u
            for n in range(1, self.maxdeg):
                self.h1[n + 1] = (u * self.h1[n] - sqrt(n * 1.0) * self.h1[n - 1]) / sqrt(n + 1.0)
            self.d1[0] = 0.0
            for n in range(1, self.maxdeg + 1):
                self.d1[n] = sa * sqrt(n * 1.0) * self.h1[n - 1]
            if self.dim == 2:
                u = sb * x[1]
                self.h2[0] = 1.0
                self.h2[1] = u
                for n in range(1, self.maxdeg):
                    self.h2[n + 1] = (u * self.h2[n] - sqrt(n * 1.0) * self.h2[n - 1]) / sqrt(n + 1.0)
                self.d2[0] = 0.0
                for n in range(1, self.maxdeg + 1):
                    self.d2[n] = sb * sqrt(n * 1.0) * self.h2[n - 1]
            else:
                self.h2[0] = 1.0
                self.d2[0] = 0.0
        elif self.kind == 3:
            self.px[0] = 1.0
            self.py[0] = 1.0
            self.pz[0] = 1.0
            for n in range(1, self.maxdeg + 1):
                self.px[n] = self.px[n - 1] * x[0]
                self.py[n] = self.py[n - 1] * x[1]
                self.pz[n] = self.pz[n - 1] * x[2]
        elif self.kind == 2:
            u = (x[0] - self.gx0) / self.gdx
            idx = cython.cast(cython.int, floor(u))
            if idx < 0:
                idx = 0
                u = 0.0
            if idx > self.grid.shape[1] - 2:
                idx = self.grid.shape[1] - 2
                u = idx + 1.0
            w = u - idx
        for t in range(self.nterm):
            m = cython.cast(cython.int, self.ti[t, 3])
            dec = self.decay[m]
            r = self.rates[m]
            if self.kind == 0:
                i = cython.cast(cython.int, self.ti[t, 0])
                j = cython.cast(cython.int, self.ti[t, 1])
                ph = i * x[0]
                if self.dim == 2:
                    ph += j * x[1]
                c = cos(ph)
                s = sin(ph)
                cc = self.tf[t, 0]
                ss = self.tf[t, 1]
                v = cc * c + ss * s
                ga = -cc * s + ss * c
                gb = ga * j
                ga = ga * i
                gc = 0.0
            elif self.kind == 1:
                i = cython.cast(cython.int, self.ti[t, 0])
                j = cython.cast(cython.int, self.ti[t, 1])
                cc = self.tf[t, 0]
                v = cc * self.h1[i] * self.h2[j]
                ga = cc * self.d1[i] * self.h2[j]
                gb = cc * self.h1[i] * self.d2[j]
                gc = 0.0
            elif self.kind == 2:
                row = cython.cast(cython.int, self.ti[t, 0])
                cc = self.tf[t, 0]
                ga = cc * ((1.0 - w) * self.grid[row, idx] + w * self.grid[row, idx + 1])
                v = cc * ((1.0 - w) * self.grid2[row, idx] + w * self.grid2[row, idx + 1])
                gb = 0.0
                gc = 0.0
            else:
                i = cython.cast(cython.int, self.ti[t, 0])
                j = cython.cast(cython.int, self.ti[t, 1])
                k = cython.cast(cython.int, self.ti[t, 2])
                cc = self.tf[t, 0]
                v = cc * self.px[i] * self.py[j] * self.pz[k]
                ga = 0.0
                gb = 0.0
                gc = 0.0
                if i > 0:
                    ga = cc * i * self.px[i - 1] * self.py[j] * self.pz[k]
                if j > 0:
                    gb = cc * j * self.px[i] * self.py[j - 1] * self.pz[k]
                if k > 0:
                    gc = cc * k * self.px[i] * self.py[j] * self.pz[k - 1]
            self.val += v * dec
            self.vy -= r * v * dec
            self.g[0] += ga * dec
            self.g[1] += gb * dec
            self.g[2] += gc * dec
            self.gy[0] -= r * ga * dec
            self.gy[1] -= r * gb * dec
            self.gy[2] -= r * gc * dec
            if with0:
                dec = self.decay0[m]
                r = self.rates0[m]
                self.gy0[0] -= r * ga * dec
                self.gy0[1] -= r * gb * dec
                self.gy0[2] -= r * gc * dec
        if self.kind == 3:
            # tangential projection
            s = self.g[0] * x[0] + self.g[1] * x[1] + self.g[2] * x[2]
            c = self.gy[0] * x[0] + self.gy[1] * x[1] + self.gy[2] * x[2]
            u = self.gy0[0] * x[0] + self.gy0[1] * x[1] + self.gy0[2] * x[2]
            for i in range(3):
                self.g[i] -= s * x[i]
                self.gy[i] -= c * x[i]
                self.gy0[i] -= u * x[i]


# -- state kinematics ------------------------------------------------------------


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cfunc
@cython.exceptval(check=False)
def _rodrigues(v: cython.double[:], off: cython.int, ax: cython.double[:],
               c: cython.double, s: cython.double):
    a0: cython.double = v[off]
    a1: cython.double = v[off + 1]
    a2: cython.double = v[off + 2]
    d: cython.double = ax[0] * a0 + ax[1] * a1 + ax[2] * a2
    cx: cython.double = ax[1] * a2 - ax[2] * a1
    cy: cython.double = ax[2] * a0 - ax[0] * a2
    cz: cython.double = ax[0] * a1 - ax[1] * a0
    v[off] = a0 * c + cx * s + ax[0] * d * (1.0 - c)
    v[off + 1] = a1 * c + cy * s + ax[1] * d * (1.0 - c)
    v[off + 2] = a2 * c + cz * s + ax[2] * d * (1.0 - c)


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
@cython.cfunc
@cython.exceptval(check=False)
def _sphere_step(x: cython.double[:], fr: cython.double[:], ax: cython.double[:],
                 n1: cython.double, n2: cython.double, sh: cython.double):
    """Geodesic step of length sh*|n| along n1 e1 + n2 e2, frame rotated along."""
    i: cython.int
    v0: cython.double = sh * (n1 * fr[0] + n2 * fr[3])
    v1: cython.double = sh * (n1 * fr[1] + n2 * fr[4])
    v2: cython.double = sh * (n1 * fr[2] + n2 * fr[5])
    ln: cython.double = sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    nrm: cython.double
    d: cython.double
    if ln == 0.0:
        return
    v0 /= ln
    v1 /= ln
    v2 /= ln
    ax[0] = x[1] * v2 - x[2] * v1
    ax[1] = x[2] * v0 - x[0] * v2
    ax[2] = x[0] * v1 - x[1] * v0
    nrm = sqrt(ax[0] * ax[0] + ax[1] * ax[1] + ax[2] * ax[2])
    for i in range(3):
        ax[i] /= nrm
    c: cython.double = cos(ln)
    s: cython.double = sin(ln)
    _rodrigues(x, 0, ax, c, s)
    _rodrigues(fr, 0, ax, c, s)
    _rodrigues(fr, 3, ax, c, s)
    nrm = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    for i in range(3):
        x[i] /= nrm
    _gram_schmidt(x, fr)


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
@cython.cfunc
@cython.exceptval(check=False)
def _gram_schmidt(x: cython.double[:], fr: cython.double[:]):
    i: cython.int
    d: cython.double = fr[0] * x[0] + fr[1] * x[1] + fr[2] * x[2]
    nrm: cython.double
    for i in range(3):
        fr[i] -= d * x[i]
    nrm = sqrt(fr[0] * fr[0] + fr[1] * fr[1] + fr[2] * fr[2])
    for i in range(3):
        fr[i] /= nrm
    d = fr[3] * x[0] + fr[4] * x[1] + fr[5] * x[2]
    e: cython.double = fr[3] * fr[0] + fr[4] * fr[1] + fr[5] * fr[2]
    for i in range(3):
        fr[3 + i] -= d * x[i] + e * fr[i]
    nrm = sqrt(fr[3] * fr[3] + fr[4] * fr[4] + fr[5] * fr[5])
    for i in range(3):
        fr[3 + i] /= nrm


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
@cython.cfunc
@cython.exceptval(check=False)
def _reference_frame(x: cython.double[:], fr: cython.double[:]):
    i: cython.int
    k: cython.int = 0
    if fabs(x[1]) < fabs(x[k]):
        k = 1
    if fabs(x[2]) < fabs(x[k]):
        k = 2
    for i in range(6):
        fr[i] = 0.0
    fr[k] = 1.0
    d: cython.double = x[k]
    for i in range(3):
        fr[i] -= d * x[i]
    nrm: cython.double = sqrt(fr[0] * fr[0] + fr[1] * fr[1] + fr[2] * fr[2])
    for i in range(3):
        fr[i] /= nrm
    fr[3] = x[1] * fr[2] - x[2] * fr[1]
    fr[4] = x[2] * fr[0] - x[0] * fr[2]
    fr[5] = x[0] * fr[1] - x[1] * fr[0]


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
@cython.cfunc
@cython.exceptval(check=False)
def _sample_stationary(kind: cython.int, dim: cython.int, a0: cython.double, a1: cython.double,
                       rng: Stream, x: cython.double[:], fr: cython.double[:]) -> cython.int:
    i: cython.int
    z: cython.double
    nrm: cython.double
    for i in range(6):
        fr[i] = 0.0
    fr[0] = 1.0
    fr[4] = 1.0
    x[1] = 0.0
    x[2] = 0.0
    if kind == 0:
        for i in range(dim):
            x[i] = TWO_PI * rng.uniform()
    elif kind == 1:
        x[0] = rng.normal() / sqrt(a0)
        if dim == 2:
            x[1] = rng.normal() / sqrt(a1)
    elif kind == 2:
        for i in range(1000000):
            z = rng.normal()
            if rng.uniform() < exp(-0.25 * z * z * z * z + 0.5 * z * z - 0.25):
                x[0] = z
                return 0
        return 1
    else:
        for i in range(3):
            x[i] = rng.normal()
        nrm = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
        for i in range(3):
            x[i] /= nrm
        _reference_frame(x, fr)
    return 0


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
@cython.cfunc
@cython.exceptval(check=False)
def _advance(kind: cython.int, dim: cython.int, a0: cython.double, a1: cython.double,
             x: cython.double[:], fr: cython.double[:], ax: cython.double[:],
             n1: cython.double, n2: cython.double, h: cython.double,
             curv: cython.double[:]):
    """Move X by time h with the given standard normals; curv gets the mean
    curvature eigenvalues over the step (for the multiplicative functional)."""
    e: cython.double
    xm: cython.double
    if kind == 0:
        x[0] = fmod(x[0] + sqrt(h) * n1, TWO_PI)
        if x[0] < 0:
            x[0] += TWO_PI
        if x[0] >= TWO_PI:
            x[0] = 0.0
        if dim == 2:
            x[1] = fmod(x[1] + sqrt(h) * n2, TWO_PI)
            if x[1] < 0:
                x[1] += TWO_PI
            if x[1] >= TWO_PI:
                x[1] = 0.0
        curv[0] = 0.0
        curv[1] = 0.0
    elif kind == 1:
        # exact Ornstein-Uhlenbeck transition
        e = exp(-0.5 * a0 * h)
        x[0] = x[0] * e + sqrt((1.0 - e * e) / a0) * n1
        if dim == 2:
            e = exp(-0.5 * a1 * h)
            x[1] = x[1] * e + sqrt((1.0 - e * e) / a1) * n2
        curv[0] = a0
        curv[1] = a1
    elif kind == 2:
        xm = x[0]
        x[0] = x[0] + sqrt(h) * n1 - 0.5 * h * xm * xm * xm
        xm = 0.5 * (xm + x[0])
        curv[0] = 3.0 * xm * xm
        curv[1] = 0.0
    else:
        _sphere_step(x, fr, ax, n1, n2, sqrt(h))
        curv[0] = 1.0
        curv[1] = 1.0


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cfunc
@cython.exceptval(check=False)
def _frame_components(kind: cython.int, dim: cython.int, g: cython.double[:], fr: cython.double[:],
                      out: cython.double[:]):
    if kind == 3:
        out[0] = g[0] * fr[0] + g[1] * fr[1] + g[2] * fr[2]
        out[1] = g[0] * fr[3] + g[1] * fr[4] + g[2] * fr[5]
    else:
        out[0] = g[0]
        out[1] = g[1]


# -- Riesz transform payoffs -------------------------------------------------------------


@cython.cfunc
@cython.exceptval(check=False)
@cython.inline
def _comp_weight(form: cython.int, db: cython.double, h: cython.double) -> cython.double:
    if form == 0:
        return db * db
    if form == 1:
        return h
    return 0.5 * (db * db + h)


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cfunc
@cython.exceptval(check=False)
def _decay_rows(acc: cython.double[:, :], q0: cython.double, q1: cython.double):
    r: cython.int
    for r in range(acc.shape[0]):
        acc[r, 0] *= q0
        acc[r, 1] *= q1


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def riesz_batch(tab: FieldTable, a: cython.double, y: cython.double, dt: cython.double,
                kappa: cython.double, hmax: cython.double, max_steps: cython.longlong,
                b_live: cython.double, d_mix: cython.double, comp_zero: cython.int,
                comp_form: cython.int, levels: cython.double[:], seed,
                start: cython.longlong, out: cython.double[:, :]):
    """Background-radiation paths to absorption with forward and reversed payoffs.

    Steps are h = clip(kappa b^2, dt, hmax); absorption inside a step is
    detected with the Brownian-bridge hit probability. Above ``b_live`` the
    integrand is below tolerance: only B moves and the elapsed time is
    replayed on X on return (exactly on torus/gauss, by regeneration from
    the stationary law when it exceeds ``d_mix``, else by substeps).

    Payoffs are carried in frame components and decayed by
    exp(-(a + K) h / 2) per step, K the curvature eigenvalues, so the stored
    value is the terminal factor times the completed sum. ``comp_form``
    selects the reversed compensator weight: 0 dB^2, 1 h, 2 (dB^2 + h)/2.
    For each entry of ``levels`` (below y) the forward payoff is also
    accumulated from the first step at or below that level (columns
    14 + 3k .. 16 + 3k).
    """
    import numpy as np
    kind: cython.int = tab.kind
    dim: cython.int = tab.dim
    a0: cython.double = tab.alpha0
    a1: cython.double = tab.alpha1
    count: cython.longlong = out.shape[0]
    nlev: cython.int = levels.shape[0]
    xa = np.zeros(3)
    fra = np.zeros(6)
    axa = np.zeros(3)
    cva = np.zeros(2)
    gfa = np.zeros(2)
    gya = np.zeros(2)
    acca = np.zeros((2 + nlev, 2))
    sta = np.zeros(max(nlev, 1), dtype=np.int32)
    x: cython.double[:] = xa
    fr: cython.double[:] = fra
    ax: cython.double[:] = axa
    curv: cython.double[:] = cva
    gf: cython.double[:] = gfa
    gyf: cython.double[:] = gya
    acc: cython.double[:, :] = acca
    started: cython.int[:] = sta
    rng: Stream
    p: cython.longlong
    steps: cython.longlong
    regen: cython.longlong
    b: cython.double
    t: cython.double
    h: cython.double
    hh: cython.double
    bn: cython.double
    db: cython.double
    pend_db: cython.double
    pend_h: cython.double
    d0: cython.double
    d1: cython.double
    pd0: cython.double
    pd1: cython.double
    j2: cython.double
    dead: cython.double
    n1: cython.double
    n2: cython.double
    q: cython.double
    sub: cython.double
    hit: cython.int
    censored: cython.int
    pending: cython.int
    closing: cython.int
    i: cython.int
    lv: cython.int
    for p in range(count):
        rng = Stream(seed, start + p)
        censored = _sample_stationary(kind, dim, a0, a1, rng, x, fr)
        b = y
        t = 0.0
        steps = 0
        regen = 0
        _decay_rows(acc, 0.0, 0.0)
        for lv in range(nlev):
            started[lv] = 0
        j2 = 0.0
        dead = 0.0
        pending = 0
        pend_db = 0.0
        pend_h = 0.0
        pd0 = 1.0
        pd1 = 1.0
        n2 = 0.0
        closing = 0
        while censored == 0:
            if steps >= max_steps:
                censored = 1
                break
            if closing == 0 and b > b_live:
                h = kappa * b * b
                if h < dt:
                    h = dt
                b += sqrt(h) * rng.normal()
                dead += h
                t += h
                steps += 1
                pending = 0
                if b <= 0.0:
                    b = 0.0
                    closing = 1
                continue
            if dead > 0.0:
                if kind <= 1:
                    n1 = rng.normal()
                    if dim == 2:
                        n2 = rng.normal()
                    _advance(kind, dim, a0, a1, x, fr, ax, n1, n2, dead, curv)
                    _decay_rows(acc, exp(-0.5 * (a + curv[0]) * dead), exp(-0.5 * (a + curv[1]) * dead))
                elif dead >= d_mix:
                    censored = _sample_stationary(kind, dim, a0, a1, rng, x, fr)
                    _decay_rows(acc, 0.0, 0.0)
                    regen += 1
                else:
                    while dead > 0.0:
                        sub = hmax if dead > hmax else dead
                        n1 = rng.normal()
                        if dim == 2:
                            n2 = rng.normal()
                        _advance(kind, dim, a0, a1, x, fr, ax, n1, n2, sub, curv)
                        _decay_rows(acc, exp(-0.5 * (a + curv[0]) * sub), exp(-0.5 * (a + curv[1]) * sub))
                        dead -= sub
                        steps += 1
                dead = 0.0
                continue
            # integrand at the current point: left point of the next step and
            # right point of the pending one
            tab.eval(x, b, comp_zero)
            _frame_components(kind, dim, tab.g, fr, gf)
            if comp_zero:
                _frame_components(kind, dim, tab.gy0, fr, gyf)
            else:
                _frame_components(kind, dim, tab.gy, fr, gyf)
            if pending:
                q = _comp_weight(comp_form, pend_db, pend_h)
                acc[1, 0] = pd0 * (acc[1, 0] + gf[0] * pend_db - gyf[0] * q)
                acc[1, 1] = pd1 * (acc[1, 1] + gf[1] * pend_db - gyf[1] * q)
                pending = 0
            if closing:
                break
            h = kappa * b * b
            if h < dt:
                h = dt
            if h > hmax:
                h = hmax
            db = sqrt(h) * rng.normal()
            bn = b + db
            hit = 0
            if bn <= 0.0:
                hit = 1
            elif 2.0 * b * bn < 40.0 * h and rng.uniform() < exp(-2.0 * b * bn / h):
                hit = 1
            hh = h
            if hit:
                hh = h * rng.uniform()
                db = -b
            n1 = rng.normal()
            if dim == 2:
                n2 = rng.normal()
            _advance(kind, dim, a0, a1, x, fr, ax, n1, n2, hh, curv)
            d0 = exp(-0.5 * (a + curv[0]) * hh)
            d1 = exp(-0.5 * (a + curv[1]) * hh)
            acc[0, 0] = d0 * (acc[0, 0] + gf[0] * db)
            acc[0, 1] = d1 * (acc[0, 1] + gf[1] * db)
            for lv in range(nlev):
                if started[lv] == 0 and b <= levels[lv]:
                    started[lv] = 1
                if started[lv]:
                    acc[2 + lv, 0] = d0 * (acc[2 + lv, 0] + gf[0] * db)
                    acc[2 + lv, 1] = d1 * (acc[2 + lv, 1] + gf[1] * db)
            j2 += (tab.g[0] * tab.g[0] + tab.g[1] * tab.g[1] + tab.g[2] * tab.g[2]) * hh
            t += hh
            steps += 1
            pending = 1
            pend_db = db
            pend_h = hh
            pd0 = d0
            pd1 = d1
            if hit:
                b = 0.0
                closing = 1
            else:
                b = bn
        for i in range(3):
            out[p, i] = x[i]
        out[p, 3] = t
        out[p, 4] = censored
        for lv in range(2 + nlev):
            i = 5 + 3 * lv if lv < 2 else 14 + 3 * (lv - 2)
            if kind == 3:
                out[p, i] = acc[lv, 0] * fr[0] + acc[lv, 1] * fr[3]
                out[p, i + 1] = acc[lv, 0] * fr[1] + acc[lv, 1] * fr[4]
                out[p, i + 2] = acc[lv, 0] * fr[2] + acc[lv, 1] * fr[5]
            else:
                out[p, i] = acc[lv, 0]
                out[p, i + 1] = acc[lv, 1]
                out[p, i + 2] = 0.0
        out[p, 11] = j2
        out[p, 12] = steps
        out[p, 13] = regen
# -- Beurling-Ahlfors on the flat 2-torus --------------------------------------------------


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
@cython.cfunc
@cython.exceptval(check=False)
def _heat_form(ti: cython.longlong[:, :], tf: cython.double[:, :], rate: cython.double[:],
               x0: cython.double, x1: cython.double, s: cython.double,
               u: cython.double[:], du: cython.double[:], ddu: cython.double[:]):
    """Heat-extended 1-form at remaining time s: u[l], du[2j+l] = d_j u_l,
    ddu[4k+2j+l] = d_k d_j u_l."""
    t: cython.int
    i: cython.int
    k1: cython.double
    k2: cython.double
    l: cython.int
    dec: cython.double
    c: cython.double
    sn: cython.double
    v: cython.double
    w: cython.double
    for i in range(2):
        u[i] = 0.0
    for i in range(4):
        du[i] = 0.0
    for i in range(8):
        ddu[i] = 0.0
    for t in range(ti.shape[0]):
        k1 = ti[t, 0]
        k2 = ti[t, 1]
        l = cython.cast(cython.int, ti[t, 2])
        dec = exp(-s * rate[t])
        c = cos(k1 * x0 + k2 * x1)
        sn = sin(k1 * x0 + k2 * x1)
        v = (tf[t, 0] * c + tf[t, 1] * sn) * dec
        w = (-tf[t, 0] * sn + tf[t, 1] * c) * dec
        u[l] += v
        du[l] += k1 * w
        du[2 + l] += k2 * w
        ddu[l] -= k1 * k1 * v
        ddu[2 + l] -= k1 * k2 * v
        ddu[4 + l] -= k2 * k1 * v
        ddu[6 + l] -= k2 * k2 * v


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def ba_batch(ti: cython.longlong[:, :], tf: cython.double[:, :], rate: cython.double[:],
             rate_res: cython.double[:], bt: cython.double[:], a: cython.double,
             T: cython.double, dt: cython.double, comp_dt: cython.int, seed,
             start: cython.longlong, out: cython.double[:, :]):
    """Horizon paths of Brownian motion on the flat 2-torus with forward and
    reversed contracted payoffs and the heat-extension martingale residual.

    ``bt[8i+4j+2m+l]`` is the endomorphism table already arranged so that
    index i pairs with the increment and j with the derivative direction.
    """
    import numpy as np
    count: cython.longlong = out.shape[0]
    ua = np.zeros(2)
    dua = np.zeros(4)
    ddua = np.zeros(8)
    u: cython.double[:] = ua
    du: cython.double[:] = dua
    ddu: cython.double[:] = ddua
    nsteps: cython.longlong = cython.cast(cython.longlong, floor(T / dt + 0.5))
    h: cython.double = T / nsteps
    sh: cython.double = sqrt(h)
    decay: cython.double = exp(-0.5 * a * h)
    p: cython.longlong
    n: cython.longlong
    i: cython.int
    j: cython.int
    m: cython.int
    l: cython.int
    k: cython.int
    x0: cython.double
    x1: cython.double
    y0: cython.double
    y1: cython.double
    dx0: cython.double
    dx1: cython.double
    s: cython.double
    Pa = np.zeros(2)
    Ra = np.zeros(2)
    Sa = np.zeros(2)
    dxa = np.zeros(2)
    P: cython.double[:] = Pa
    R: cython.double[:] = Ra
    S: cython.double[:] = Sa
    dx: cython.double[:] = dxa
    term: cython.double
    comp: cython.double
    rng: Stream
    for p in range(count):
        rng = Stream(seed, start + p)
        x0 = TWO_PI * rng.uniform()
        x1 = TWO_PI * rng.uniform()
        _heat_form(ti, tf, rate_res, x0, x1, T, u, du, ddu)
        S[0] = -u[0]
        S[1] = -u[1]
        P[0] = 0.0
        P[1] = 0.0
        R[0] = 0.0
        R[1] = 0.0
        for n in range(nsteps):
            s = T - n * h
            dx0 = sh * rng.normal()
            dx1 = sh * rng.normal()
            dx[0] = dx0
            dx[1] = dx1
            # forward: left point
            _heat_form(ti, tf, rate, x0, x1, s, u, du, ddu)
            for m in range(2):
                term = 0.0
                for i in range(2):
                    for j in range(2):
                        for l in range(2):
                            term += bt[8 * i + 4 * j + 2 * m + l] * du[2 * j + l] * dx[i]
                P[m] = decay * (P[m] + term)
            _heat_form(ti, tf, rate_res, x0, x1, s, u, du, ddu)
            S[0] -= du[0] * dx0 + du[2] * dx1
            S[1] -= du[1] * dx0 + du[3] * dx1
            y0 = fmod(x0 + dx0, TWO_PI)
            if y0 < 0:
                y0 += TWO_PI
            if y0 >= TWO_PI:
                y0 = 0.0
            y1 = fmod(x1 + dx1, TWO_PI)
            if y1 < 0:
                y1 += TWO_PI
            if y1 >= TWO_PI:
                y1 = 0.0
            # reversed: right point, same heat time, Taylor compensator
            _heat_form(ti, tf, rate, y0, y1, s, u, du, ddu)
            for m in range(2):
                term = 0.0
                comp = 0.0
                for i in range(2):
                    for j in range(2):
                        for l in range(2):
                            term += bt[8 * i + 4 * j + 2 * m + l] * du[2 * j + l] * dx[i]
                            for k in range(2):
                                if comp_dt:
                                    if k == i:
                                        comp += bt[8 * i + 4 * j + 2 * m + l] * ddu[4 * k + 2 * j + l] * h
                                else:
                                    comp += (bt[8 * i + 4 * j + 2 * m + l] * ddu[4 * k + 2 * j + l]
                                             * dx[k] * dx[i])
                R[m] = decay * (R[m] + term - comp)
            x0 = y0
            x1 = y1
        _heat_form(ti, tf, rate_res, x0, x1, 0.0, u, du, ddu)
        S[0] += u[0]
        S[1] += u[1]
        out[p, 0] = x0
        out[p, 1] = x1
        out[p, 2] = P[0]
        out[p, 3] = P[1]
        out[p, 4] = R[0]
        out[p, 5] = R[1]
        out[p, 6] = S[0]
        out[p, 7] = S[1]
        out[p, 8] = nsteps


# -- identity checks ------------------------------------------------------------------------


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def ito_batch(tab: FieldTable, a: cython.double, y: cython.double, dt: cython.double,
              kappa: cython.double, max_steps: cython.longlong, seed,
              start: cython.longlong, out: cython.double[:, :]):
    """Residual of e^{-a tau/2} F(X_tau, 0) = F(X_0, y) + sum e^{-as/2} dF on torus paths,
    F the Poisson extension in ``tab`` (flat, so M = Id)."""
    import numpy as np
    kind: cython.int = tab.kind
    dim: cython.int = tab.dim
    count: cython.longlong = out.shape[0]
    xa = np.zeros(3)
    fra = np.zeros(6)
    axa = np.zeros(3)
    cva = np.zeros(2)
    x: cython.double[:] = xa
    fr: cython.double[:] = fra
    ax: cython.double[:] = axa
    curv: cython.double[:] = cva
    p: cython.longlong
    steps: cython.longlong
    b: cython.double
    t: cython.double
    h: cython.double
    bn: cython.double
    db: cython.double
    n1: cython.double
    n2: cython.double
    dx0: cython.double
    dx1: cython.double
    old0: cython.double
    old1: cython.double
    w: cython.double
    acc: cython.double
    censored: cython.int
    hit: cython.int
    rng: Stream
    for p in range(count):
        rng = Stream(seed, start + p)
        censored = _sample_stationary(kind, dim, 1.0, 1.0, rng, x, fr)
        b = y
        t = 0.0
        steps = 0
        tab.eval(x, b, 0)
        acc = -tab.val
        while True:
            if steps >= max_steps:
                censored = 1
                break
            tab.eval(x, b, 0)
            w = exp(-0.5 * a * t)
            h = kappa * b * b
            if h < dt:
                h = dt
            db = sqrt(h) * rng.normal()
            bn = b + db
            hit = 0
            if bn <= 0.0:
                hit = 1
            elif 2.0 * b * bn < 40.0 * h and rng.uniform() < exp(-2.0 * b * bn / h):
                hit = 1
            if hit:
                h = h * rng.uniform()
                db = -b
            n1 = rng.normal()
            n2 = rng.normal()
            old0 = x[0]
            old1 = x[1]
            dx0 = sqrt(h) * n1
            dx1 = sqrt(h) * n2 if dim == 2 else 0.0
            _advance(kind, dim, 1.0, 1.0, x, fr, ax, n1, n2, h, curv)
            acc -= w * (tab.g[0] * dx0 + tab.g[1] * dx1 + tab.vy * db)
            t += h
            steps += 1
            if hit:
                b = 0.0
                break
            b = bn
        tab.eval(x, 0.0, 0)
        acc += exp(-0.5 * a * t) * tab.val
        out[p, 0] = acc
        out[p, 1] = t
        out[p, 2] = censored
        out[p, 3] = steps


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def occupation_batch(lo: cython.double, hi: cython.double, y: cython.double, dt: cython.double,
                     kappa: cython.double, max_steps: cython.longlong, seed,
                     start: cython.longlong, out: cython.double[:, :]):
    """Left-point occupation integral of 1_[lo,hi](B_s) up to absorption.
    Steps are max(dt, kappa b^2); a discontinuous step rule biases occupation."""
    count: cython.longlong = out.shape[0]
    p: cython.longlong
    steps: cython.longlong
    b: cython.double
    bn: cython.double
    h: cython.double
    t: cython.double
    occ: cython.double
    hit: cython.int
    censored: cython.int
    rng: Stream
    for p in range(count):
        rng = Stream(seed, start + p)
        b = y
        t = 0.0
        occ = 0.0
        steps = 0
        censored = 0
        while True:
            if steps >= max_steps:
                censored = 1
                break
            h = kappa * b * b
            if h < dt:
                h = dt
            bn = b + sqrt(h) * rng.normal()
            hit = 0
            if bn <= 0.0:
                hit = 1
            elif 2.0 * b * bn < 40.0 * h and rng.uniform() < exp(-2.0 * b * bn / h):
                hit = 1
            if hit:
                h = h * rng.uniform()
            if lo <= b and b <= hi:
                occ += h
            t += h
            steps += 1
            if hit:
                break
            b = bn
        out[p, 0] = occ
        out[p, 1] = t
        out[p, 2] = censored
        out[p, 3] = steps


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def exit_time_batch(r0: cython.double, dt_min: cython.double, max_steps: cython.longlong,
                    seed, start: cython.longlong, out: cython.double[:, :]):
    """Exit time of standard 3-d Brownian motion (generator Laplacian/2) from the
    unit ball, started at radius r0. Steps shrink near the sphere; crossings
    inside a step use the half-space bridge probability."""
    count: cython.longlong = out.shape[0]
    p: cython.longlong
    steps: cython.longlong
    x0: cython.double
    x1: cython.double
    x2: cython.double
    y0: cython.double
    y1: cython.double
    y2: cython.double
    d: cython.double
    dn: cython.double
    h: cython.double
    sh: cython.double
    t: cython.double
    censored: cython.int
    hit: cython.int
    rng: Stream
    for p in range(count):
        rng = Stream(seed, start + p)
        x0 = r0
        x1 = 0.0
        x2 = 0.0
        t = 0.0
        steps = 0
        censored = 0
        while True:
            if steps >= max_steps:
                censored = 1
                break
            d = 1.0 - sqrt(x0 * x0 + x1 * x1 + x2 * x2)
            h = (d / 3.0) * (d / 3.0)
            if h < dt_min:
                h = dt_min
            sh = sqrt(h)
            y0 = x0 + sh * rng.normal()
            y1 = x1 + sh * rng.normal()
            y2 = x2 + sh * rng.normal()
            dn = 1.0 - sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            hit = 0
            if dn <= 0.0:
                hit = 1
            elif 2.0 * d * dn < 40.0 * h and rng.uniform() < exp(-2.0 * d * dn / h):
                hit = 1
            steps += 1
            if hit:
                t += h * rng.uniform()
                break
            t += h
            x0 = y0
            x1 = y1
            x2 = y2
        out[p, 0] = t
        out[p, 1] = censored
        out[p, 2] = steps


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def reversed_drift_batch(y: cython.double, dt: cython.double, lo: cython.double,
                         hi: cython.double, max_steps: cython.longlong, seed,
                         start: cython.longlong, out: cython.double[:, :]):
    """Per-path sums for the weighted regression of reversed increments on 1/B.

    Reading forward step B_i -> B_{i+1} backwards gives the reversed left point
    B_{i+1} and increment B_i - B_{i+1}; steps whose reversed left point lies
    in [lo, hi] contribute (B_i - B_{i+1})/B_{i+1} to ``num`` and
    h/B_{i+1}^2 to ``den``.
    """
    count: cython.longlong = out.shape[0]
    p: cython.longlong
    steps: cython.longlong
    b: cython.double
    bn: cython.double
    h: cython.double
    num: cython.double
    den: cython.double
    censored: cython.int
    rng: Stream
    for p in range(count):
        rng = Stream(seed, start + p)
        b = y
        num = 0.0
        den = 0.0
        steps = 0
        censored = 0
        while True:
            if steps >= max_steps:
                censored = 1
                break
            h = dt
            if b > 2.0 * hi:
                h = 0.01 * b * b
            bn = b + sqrt(h) * rng.normal()
            steps += 1
            if bn <= 0.0 or (2.0 * b * bn < 40.0 * h and rng.uniform() < exp(-2.0 * b * bn / h)):
                break
            if lo <= bn and bn <= hi:
                num += (b - bn) / bn
                den += h / (bn * bn)
            b = bn
        out[p, 0] = num
        out[p, 1] = den
        out[p, 2] = censored
        out[p, 3] = steps


def sample_stationary_batch(kind, dim, a0, a1, seed, start, count):
    """Stationary draws (positions, frames) through the kernel sampler."""
    import numpy as np
    xs = np.zeros((count, 3))
    frs = np.zeros((count, 6))
    xa = np.zeros(3)
    fra = np.zeros(6)
    rng: Stream
    for p in range(count):
        rng = Stream(seed, start + p)
        if _sample_stationary(kind, dim, a0, a1, rng, xa, fra):
            raise RuntimeError("stationary sampler exceeded retry cap")
        xs[p] = xa
        frs[p] = fra
    return xs, frs
