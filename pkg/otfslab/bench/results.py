"""Result rows and the two files every sweep writes: a CSV table and a
self-contained SVG plot of FER against the sweep variable.

CSV quoting follows the csv module's default dialect (minimal quoting,
CRLF-free '\\n' line endings). Floats are written with repr() so a value
read back is exactly the value computed; blank cells mean "not
applicable" (no confidence interval for analytic rows, no wall time
unless timing was requested).
"""
from collections import OrderedDict, namedtuple
import csv
import math

from lxml import etree

import logging
logger = logging.getLogger(__name__)

CSV_FIELDS = ['scheme', 'sweep', 'x', 'fer', 'ci_half', 'n_trials', 'wall_ms']

ResultRow = namedtuple('ResultRow', CSV_FIELDS)
ResultRow.__new__.__defaults__ = (None, None, None)

SVG_NS = 'http://www.w3.org/2000/svg'
WIDTH, HEIGHT = 640, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 30, 50
FER_FLOOR = 1e-7
COLOURS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#17becf', '#7f7f7f']


def format_cell(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def check_row(row):
    if not 0.0 <= row.fer <= 1.0:
        raise ValueError("FER %r for %s at %s=%r is outside [0, 1]" % (row.fer, row.scheme, row.sweep, row.x))
    if row.ci_half is not None and row.ci_half < 0:
        raise ValueError("Negative confidence half-width for %s" % row.scheme)


def emit_csv(rows, path):
    with open(path, 'w', encoding='utf8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_FIELDS)
        for row in rows:
            check_row(row)
            writer.writerow([row.scheme, row.sweep, format_cell(float(row.x)), format_cell(float(row.fer)),
                format_cell(row.ci_half), format_cell(row.n_trials), format_cell(row.wall_ms)])
    return path


def read_csv(path):
    """Reads rows written by emit_csv back into ResultRows."""
    def number(value, kind=float):
        return kind(value) if value != '' else None

    with open(path, encoding='utf8', newline='') as f:
        return [ResultRow(r['scheme'], r['sweep'], float(r['x']), float(r['fer']),
            number(r['ci_half']), number(r['n_trials'], int), number(r['wall_ms']))
            for r in csv.DictReader(f)]


def _series(rows):
    series = OrderedDict()
    for row in rows:
        series.setdefault(row.scheme, []).append((float(row.x), float(row.fer)))
    return series


def _svg(parent, tag, **attrs):
    return etree.SubElement(parent, '{%s}%s' % (SVG_NS, tag),
        dict((k.rstrip('_').replace('_', '-'), str(v)) for k, v in attrs.items()))


def render_svg(rows, title='', x_label=''):
    """An lxml tree for a log-scale FER plot, one polyline per scheme."""
    rows = list(rows)
    root = etree.Element('{%s}svg' % SVG_NS, nsmap={None: SVG_NS},
        attrib={'version': '1.1', 'width': str(WIDTH), 'height': str(HEIGHT),
                'viewBox': '0 0 %d %d' % (WIDTH, HEIGHT)})
    _svg(root, 'title').text = title or 'FER'
    _svg(root, 'rect', x=0, y=0, width=WIDTH, height=HEIGHT, fill='white')

    left, top = MARGIN_LEFT, MARGIN_TOP
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    xs = [float(r.x) for r in rows]
    x_min, x_max = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_max == x_min:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    logs = [math.log10(max(float(r.fer), FER_FLOOR)) for r in rows]
    y_min = math.floor(min(logs)) if logs else -6
    y_max = 0
    if y_min >= y_max:
        y_min = y_max - 1

    def px(x):
        return left + (x - x_min) / (x_max - x_min) * plot_w

    def py(fer):
        return top + (y_max - math.log10(max(fer, FER_FLOOR))) / float(y_max - y_min) * plot_h

    axes = _svg(root, 'g', id='axes', stroke='black', fill='none')
    _svg(axes, 'rect', x=left, y=top, width=plot_w, height=plot_h)
    labels = _svg(root, 'g', id='labels', font_family='sans-serif', font_size=11)
    for decade in range(int(y_min), y_max + 1):
        y = py(10.0 ** decade)
        _svg(axes, 'line', x1=left - 4, y1='%.2f' % y, x2=left, y2='%.2f' % y)
        _svg(labels, 'text', x=left - 8, y='%.2f' % (y + 4), text_anchor='end').text = '1e%d' % decade
    for i in range(5):
        value = x_min + (x_max - x_min) * i / 4.0
        x = px(value)
        _svg(axes, 'line', x1='%.2f' % x, y1=top + plot_h, x2='%.2f' % x, y2=top + plot_h + 4)
        _svg(labels, 'text', x='%.2f' % x, y=top + plot_h + 18, text_anchor='middle').text = '%.3g' % value
    _svg(labels, 'text', x=left + plot_w / 2.0, y=HEIGHT - 10, text_anchor='middle').text = x_label
    _svg(labels, 'text', x=16, y=top + plot_h / 2.0, text_anchor='middle',
        transform='rotate(-90 16 %.1f)' % (top + plot_h / 2.0)).text = 'FER'

    curves = _svg(root, 'g', id='curves', fill='none', stroke_width=1.5)
    legend = _svg(root, 'g', id='legend', font_family='sans-serif', font_size=11)
    for index, (scheme, points) in enumerate(_series(rows).items()):
        colour = COLOURS[index % len(COLOURS)]
        points = sorted(points)
        dashed = scheme.endswith('-theo')
        line = _svg(curves, 'polyline', stroke=colour,
            points=' '.join('%.2f,%.2f' % (px(x), py(fer)) for x, fer in points))
        if dashed:
            line.set('stroke-dasharray', '5,3')
        ly = top + 14 + 16 * index
        lx = left + plot_w + 12
        _svg(legend, 'line', x1=lx, y1=ly - 4, x2=lx + 20, y2=ly - 4, stroke=colour,
            stroke_dasharray='5,3' if dashed else 'none')
        _svg(legend, 'text', x=lx + 26, y=ly).text = scheme
    return etree.ElementTree(root)


def emit_svg(rows, path, title='', x_label=''):
    render_svg(rows, title, x_label).write(path, xml_declaration=True, encoding='utf-8', pretty_print=True)
    return path
