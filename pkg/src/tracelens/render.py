"""Human-readable views of a classification report.

The text view is a two-column diff: the fault-injected trace on the left,
the selected fault-free reference on the right. Each line opens with a
marker:

    =    event present in both traces
    +!   only in the injected trace, labeled spurious
    +?   only in the injected trace, judged benign by the model
    -!   only in the reference, labeled missing
    -?   only in the reference, judged benign by the model

Lines decided by the model carry the predicted probability. Header lines
start with ``#``.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .classifier import ClassificationReport, EventRecord, Label, Origin

FORMATS = ("text", "json", "svg")

_MARK = {
    (Origin.INJECTED, Label.COMMON): "=",
    (Origin.INJECTED, Label.SPURIOUS): "+!",
    (Origin.INJECTED, Label.NON_ANOMALOUS): "+?",
    (Origin.REFERENCE, Label.MISSING): "-!",
    (Origin.REFERENCE, Label.NON_ANOMALOUS): "-?",
}

_FILL = {
    Label.COMMON: "#c8c8c8",
    Label.SPURIOUS: "#d62728",
    Label.MISSING: "#ff7f0e",
    Label.NON_ANOMALOUS: "#9ecae1",
}


def marker(rec: EventRecord) -> str:
    return _MARK[(rec.origin, rec.label)]


def render_text(report: ClassificationReport, header: bool = True) -> str:
    width = max([len(r.name) for r in report.records] + [8]) + 7
    lines = []
    if header:
        s = report.summary()
        lines.append(f"# experiment {report.experiment_id}  reference {report.reference_name} "
                     f"(#{report.reference_index})  mode {report.mode.value}  order {report.order}  "
                     f"nLCS {report.nlcs:.4f}")
        lines.append(f"# anomalies {s['anomalies']} (spurious {s['spurious']}, missing {s['missing']})"
                     f"  thresholds {report.thresholds.eps_spurious:g}/{report.thresholds.eps_missing:g}")
    for r in report.records:
        cell = f"{r.position:5d} {r.name}"
        if r.origin == Origin.REFERENCE:
            left, right = "", cell
        elif r.label == Label.COMMON:
            left, right = cell, f"{r.partner:5d} {r.name}"
        else:
            left, right = cell, ""
        line = f"{marker(r):<3}{left:<{width}}{right:<{width}}"
        if r.probability is not None:
            line += f"p={r.probability:.4f}"
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"


def render_svg(report: ClassificationReport, cell: int = 14, lane: int = 40) -> str:
    """Two-lane timeline: reference on top, injected run below.

    Events are placed in diff order, so a column holds either one matched
    pair or a single unmatched event. Anomalies are filled in warm colors.
    """
    pad, label_w = 10, 120
    n = len(report.records)
    width = label_w + pad * 2 + max(n, 1) * cell
    height = pad * 3 + lane * 2 + 20
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "title").text = (f"{report.experiment_id} vs {report.reference_name} "
                                        f"({report.mode.value})")
    top, bottom = pad, pad * 2 + lane
    for y, text in ((top, "fault-free"), (bottom, "fault-injected")):
        t = ET.SubElement(svg, "text", x=str(pad), y=str(y + lane // 2 + 4),
                          attrib={"font-family": "monospace", "font-size": "12"})
        t.text = text
        ET.SubElement(svg, "line", x1=str(label_w), y1=str(y + lane // 2),
                      x2=str(width - pad), y2=str(y + lane // 2), stroke="#888")

    for col, r in enumerate(report.records):
        x = label_w + pad + col * cell
        lanes = []
        if r.origin == Origin.REFERENCE:
            lanes.append(top)
        elif r.label == Label.COMMON:
            lanes += [top, bottom]
        else:
            lanes.append(bottom)
        for y in lanes:
            rect = ET.SubElement(svg, "rect", x=str(x), y=str(y + 4), width=str(cell - 2),
                                 height=str(lane - 8), fill=_FILL[r.label],
                                 attrib={"class": r.label.value})
            tip = f"{r.name} [{r.label.value}]"
            if r.probability is not None:
                tip += f" p={r.probability:.4f}"
            ET.SubElement(rect, "title").text = tip

    legend_y = height - pad
    for i, lab in enumerate(Label):
        x = label_w + i * 110
        ET.SubElement(svg, "rect", x=str(x), y=str(legend_y - 10), width="10", height="10",
                      fill=_FILL[lab])
        t = ET.SubElement(svg, "text", x=str(x + 14), y=str(legend_y),
                          attrib={"font-family": "monospace", "font-size": "10"})
        t.text = lab.value
    return ET.tostring(svg, encoding="unicode", xml_declaration=True) + "\n"


def render_report(report: ClassificationReport, fmt: str = "text") -> str:
    if fmt == "text":
        return render_text(report)
    if fmt == "json":
        return report.to_json() + "\n"
    if fmt in ("svg", "svg-timeline"):
        return render_svg(report)
    raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
