"""CSV emission, round-trip reading, reports, and static SVG plots.

Every emitted file carries the configuration hash in a leading comment so
an artifact can always be traced back to the exact inputs that produced
it.  CSV bytes are deterministic for a given trajectory: fixed header,
fixed float rendering (17 significant digits, enough to round-trip a
double), fixed newline.
"""

import math

import numpy as np

from .errors import PipeflexError

__all__ = [
    "CSV_HEADER", "write_timeseries", "read_timeseries", "write_sweep_csv",
    "plot_timeseries", "format_constants_report", "format_spectrum_report",
]

CSV_HEADER = "t,E,G1,G2,G,Lcal,dEdt_analytic,dGdt_analytic,w_L,wt_L,V,Vt"

_SAMPLE_FIELDS = ("E", "G1", "G2", "G", "Lcal", "dE_dt_analytic",
                  "dG_dt_analytic", "w_L", "wt_L", "V", "Vt")


def _fmt(x):
    return "%.17g" % float(x)


def _hash_of(trajectory, config_hash):
    if config_hash is not None:
        return config_hash
    return trajectory.metadata.get("config_hash") or "unset"


def write_timeseries(trajectory, path, config_hash=None):
    """Write the per-sample functional values as CSV."""
    rows = []
    for t, s in zip(trajectory.times, trajectory.samples):
        rows.append(",".join([_fmt(t)]
                             + [_fmt(getattr(s, f)) for f in _SAMPLE_FIELDS]))
    body = "\n".join(["# config_hash=%s" % _hash_of(trajectory, config_hash),
                      CSV_HEADER] + rows) + "\n"
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(body)
    except OSError as exc:
        raise PipeflexError("cannot write timeseries to %r: %s"
                            % (path, exc))


def read_timeseries(path):
    """Parse a timeseries CSV back into column arrays.

    Returns (columns, config_hash) where columns maps each header name to a
    float array.  Values written by write_timeseries round-trip exactly.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise PipeflexError("cannot read timeseries from %r: %s"
                            % (path, exc))
    digest = None
    data_lines = []
    header = None
    for line in lines:
        if line.startswith("#"):
            text = line.lstrip("#").strip()
            if text.startswith("config_hash="):
                digest = text[len("config_hash="):]
            continue
        if header is None:
            header = line.split(",")
            continue
        if line:
            data_lines.append(line)
    if header is None:
        raise PipeflexError("%r contains no header row" % path)
    table = np.array([[float(v) for v in line.split(",")]
                      for line in data_lines], dtype=float)
    table = table.reshape(len(data_lines), len(header))
    columns = {name: table[:, j].copy() for j, name in enumerate(header)}
    return columns, digest


_SWEEP_COLUMNS = ("T", "assumptions_hold", "T_star", "k1", "k0", "abscissa",
                  "unstable", "fitted_rate", "blowup_t", "error")


def _sweep_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value.replace(",", ";")
    return _fmt(value)


def write_sweep_csv(report, path, config_hash="unset"):
    """One row per swept tension value, flat scalar columns."""
    lines = ["# config_hash=%s" % config_hash, ",".join(_SWEEP_COLUMNS)]
    for row in report["rows"]:
        lines.append(",".join(_sweep_cell(row.get(c)) for c in _SWEEP_COLUMNS))
    lines.append("# k1_monotone=%s" % _sweep_cell(report["k1_monotone"]))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise PipeflexError("cannot write sweep to %r: %s" % (path, exc))


# ---------------------------------------------------------------------------
# self-contained SVG plotting
# ---------------------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 62, 16, 34, 44


def _ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1.0, 2.0, 2.5, 5.0, 10.0)
               if s * mag >= raw)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out or [lo]


def _svg_line_plot(x, y, title, ylabel):
    """One polyline on labelled axes; returns the SVG body lines."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d"'
             ' viewBox="0 0 %d %d" font-family="monospace" font-size="12">'
             % (_W, _H, _W, _H),
             '<rect width="%d" height="%d" fill="white"/>' % (_W, _H)]
    if x.size == 0:
        parts.append('<text x="%d" y="%d">no finite data</text>'
                     % (_W // 2 - 50, _H // 2))
        parts.append("</svg>")
        return parts
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    iw, ih = _W - _ML - _MR, _H - _MT - _MB

    def px(v):
        return _ML + iw * (v - x0) / (x1 - x0)

    def py(v):
        return _MT + ih * (1.0 - (v - y0) / (y1 - y0))

    parts.append('<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
                 'stroke="black"/>' % (_ML, _MT, iw, ih))
    for tx in _ticks(x0, x1):
        parts.append('<line x1="%.6g" y1="%d" x2="%.6g" y2="%d" '
                     'stroke="black"/>' % (px(tx), _MT + ih, px(tx),
                                           _MT + ih + 4))
        parts.append('<text x="%.6g" y="%d" text-anchor="middle">%.4g</text>'
                     % (px(tx), _MT + ih + 18, tx))
    for ty in _ticks(y0, y1):
        parts.append('<line x1="%d" y1="%.6g" x2="%d" y2="%.6g" '
                     'stroke="black"/>' % (_ML - 4, py(ty), _ML, py(ty)))
        parts.append('<text x="%d" y="%.6g" text-anchor="end" '
                     'dominant-baseline="middle">%.4g</text>'
                     % (_ML - 8, py(ty), ty))
    pts = " ".join("%.6g,%.6g" % (px(a), py(b)) for a, b in zip(x, y))
    parts.append('<polyline points="%s" fill="none" stroke="#1f77b4" '
                 'stroke-width="1.5"/>' % pts)
    parts.append('<text x="%d" y="20" text-anchor="middle" font-size="14">'
                 '%s</text>' % (_W // 2, title))
    parts.append('<text x="%d" y="%d" text-anchor="middle">t</text>'
                 % (_ML + iw // 2, _H - 8))
    parts.append('<text x="14" y="%d" text-anchor="middle" '
                 'transform="rotate(-90 14 %d)">%s</text>'
                 % (_MT + ih // 2, _MT + ih // 2, ylabel))
    parts.append("</svg>")
    return parts


def _write_svg(path, body_lines, config_hash):
    # the comment line leads the file and carries a '#' marker so the hash
    # is greppable the same way as in the CSV outputs
    lines = ["<!--# config_hash=%s -->" % config_hash] + body_lines
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise PipeflexError("cannot write plot to %r: %s" % (path, exc))


def plot_timeseries(trajectory, prefix, config_hash=None):
    """Write E, Lyapunov value, and ln E against time as three SVG files."""
    digest = _hash_of(trajectory, config_hash)
    t = np.asarray(trajectory.times, dtype=float)
    E = np.array([s.E for s in trajectory.samples], dtype=float)
    Lcal = np.array([s.Lcal for s in trajectory.samples], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lnE = np.where(E > 0.0, np.log(np.maximum(E, 1e-300)), np.nan)
    written = []
    for suffix, y, title, ylabel in (
            ("E", E, "energy", "E(t)"),
            ("L", Lcal, "Lyapunov functional", "L(t)"),
            ("lnE", lnE, "log energy", "ln E(t)")):
        path = "%s_%s.svg" % (prefix, suffix)
        _write_svg(path, _svg_line_plot(t, y, title, ylabel), digest)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _record_pairs(params, bounds, report, constants):
    pairs = [("holds", report.holds),
             ("T_star", report.T_star),
             ("margin", report.margin),
             ("c_too_small", report.c_too_small)]
    pairs += [(k, getattr(params, k))
              for k in ("m_p", "m_f", "EI", "T", "c", "L")]
    pairs += [("sup_V2", bounds.sup_V2), ("inf_V2", bounds.inf_V2),
              ("sup_absV", bounds.sup_absV),
              ("sup_absVtV", bounds.sup_absVtV)]
    if constants is not None:
        for name in ("P", "T1", "T2", "T_star", "alpha1_sandwich", "xi1",
                     "xi2", "delta", "alpha1_decay", "gamma0", "gamma1",
                     "vartheta", "k1", "k0", "xi1_literal", "xi2_literal"):
            pairs.append((name, getattr(constants, name)))
    return pairs


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def format_constants_report(params, bounds, report, constants, machine=False):
    """Assumptions verdict plus (when available) the full constants record."""
    pairs = _record_pairs(params, bounds, report, constants)
    if machine:
        lines = ["%s=%s" % (k, _render(v)) for k, v in pairs]
    else:
        width = max(len(k) for k, _ in pairs)
        lines = ["%-*s: %s" % (width, k, _render(v)) for k, v in pairs]
        if constants is None:
            lines.append("decay certificate: not applicable "
                         "(tension threshold not met)")
        if constants is not None and getattr(constants, "note", ""):
            lines.append("note: %s" % constants.note)
    return "\n".join(lines)


def format_spectrum_report(rep, n_show=10, machine=False):
    """Frozen-time spectrum summary; eigenvalues sorted by real part."""
    lam = rep.eigenvalues[:n_show]
    if machine:
        lines = ["t=%s" % _fmt(rep.t),
                 "spectral_abscissa=%s" % _fmt(rep.spectral_abscissa),
                 "n_eigenvalues=%d" % rep.eigenvalues.size]
        lines += ["eig%d=%s%+sj" % (i, _fmt(v.real), _fmt(v.imag))
                  for i, v in enumerate(lam)]
    else:
        lines = ["frozen spectrum at t = %g" % rep.t,
                 "spectral abscissa: %.6g" % rep.spectral_abscissa,
                 "leading eigenvalues (by real part):"]
        lines += ["  % .6e %+.6e j" % (v.real, v.imag) for v in lam]
    return "\n".join(lines)
