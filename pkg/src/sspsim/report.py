"""Text, JSON and CSV rendering of scenario results and feasibility matrices.

Field order is fixed and nothing time-dependent is written, so the same
inputs always give byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional

FORMATS = ("text", "json", "csv")
RESULT_FIELDS = ("outcome", "abort_reason", "link_keys_match", "transcript_length")
MATRIX_FIELDS = ("io_pair", "oob", "attacker", "success_rate")


class IoFailure(Exception):
    pass


def _is_matrix(obj) -> bool:
    return hasattr(obj, "records") and hasattr(obj, "columns")


def _csv(rows: list, fields: tuple) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _rate(value: float) -> str:
    return f"{value:.4f}"


def render_result(result, fmt: str) -> str:
    summary = result.summary()
    if fmt == "json":
        return json.dumps({k: summary[k] for k in RESULT_FIELDS}, indent=2) + "\n"
    if fmt == "csv":
        row = dict(summary)
        row["abort_reason"] = row["abort_reason"] or ""
        row["link_keys_match"] = str(row["link_keys_match"]).lower()
        return _csv([row], RESULT_FIELDS)
    keys = result.link_keys
    lines = [
        f"outcome:           {summary['outcome']}",
        f"abort_reason:      {summary['abort_reason'] or '-'}",
        f"link_keys_match:   {str(summary['link_keys_match']).lower()}",
        f"transcript_length: {summary['transcript_length']}",
        f"model a/b:         {result.models['a'] or '-'} / {result.models['b'] or '-'}",
        f"link key a:        {keys['a'].hex() if keys['a'] else '-'}",
        f"link key b:        {keys['b'].hex() if keys['b'] else '-'}",
        f"attacker keys:     {len(result.attacker_keys)}",
        f"intercepted:       {len(result.intercept_log)}",
        f"slots:             {result.slots}",
    ]
    return "\n".join(lines) + "\n"


def render_matrix(matrix, fmt: str) -> str:
    records = matrix.records()
    if fmt == "csv":
        return _csv([{**r, "success_rate": _rate(r["success_rate"])} for r in records], MATRIX_FIELDS)
    if fmt == "json":
        doc = {
            "seeds": matrix.n_seeds,
            "attackers": list(matrix.columns),
            "cells": [{**r, "success_rate": round(r["success_rate"], 6)} for r in records],
        }
        return json.dumps(doc, indent=2) + "\n"
    rows = [matrix.row_label(row) for row in matrix.rows]
    width = max(len(pair) for pair, _ in rows)
    header = f"{'io_pair':<{width}}  oob  " + "  ".join(f"{c:>9}" for c in matrix.columns)
    lines = [f"attack success rate over {matrix.n_seeds} seeds", header, "-" * len(header)]
    for row, (pair, oob) in zip(matrix.rows, rows):
        cells = "  ".join(f"{_rate(matrix.cells[(row, c)]):>9}" for c in matrix.columns)
        lines.append(f"{pair:<{width}}  {oob:<3}  {cells}")
    return "\n".join(lines) + "\n"


def render(obj, fmt: str = "text") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {', '.join(FORMATS)}")
    return render_matrix(obj, fmt) if _is_matrix(obj) else render_result(obj, fmt)


def figure_path(destination) -> Path:
    return Path(destination).with_suffix(".png")


def emit_report(obj, fmt: str = "text", destination=None, *, figures: bool = False) -> list:
    """Write ``obj`` as ``fmt`` to ``destination`` (stdout when None or "-").

    With ``figures`` and a file destination, a PNG with the same stem is
    written next to it.  Returns the paths written.
    """
    text = render(obj, fmt)
    if destination is None or str(destination) == "-":
        sys.stdout.write(text)
        return []
    path = Path(destination)
    written = [path]
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if figures:
            from .plotting import save_figure

            written.append(save_figure(obj, figure_path(path)))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return written


# --- annotated transcript ----------------------------------------------------


def describe_event(event: dict) -> Optional[str]:
    """One human-readable line per protocol-level event; radio chatter is skipped."""
    kind = event["kind"]
    who = event.get("actor", "")
    if kind == "scenario":
        return f"scenario seed={event['seed']} a={event['device_a']} b={event['device_b']} attacker={event['attacker'] or '-'}"
    if kind == "session_start":
        return f"{who}: new pairing session as {event['role']} on {event['link']}"
    if kind == "tx":
        return f"{who} -> {event['link']}: {event['msg']}"
    if kind == "prompt":
        value = event["value"]
        shown = f" {value:06d}" if isinstance(value, int) else ""
        return f"{who}: prompt {event['prompt']}{shown}"
    if kind == "decision":
        return f"{who}: user answers {event['decision']}"
    if kind == "link_key":
        return f"{who}: {event['model']} pairing complete, link key {event['key']}"
    if kind == "abort":
        return f"{who}: abort {event['reason']}" + (f" (peer: {event['peer_reason']})" if event.get("peer_reason") else "")
    if kind == "jam_start":
        return f"{who}: jamming {event['link']} on the victims' hop sequence"
    if kind == "jam_stop":
        return f"{who}: stops jamming"
    if kind == "impersonate":
        return f"{who}: poses as {event['claimed']} towards {event['target']} claiming {event['io']}"
    if kind == "key_captured":
        return f"{who}: holds link key shared with {event['victim_label']}: {event['link_key']}"
    if kind == "relay":
        return f"{who}: relays {event['direction']} plaintext {bytes.fromhex(event['plaintext'])!r}"
    if kind in ("app_send", "app_received"):
        verb = "sends" if kind == "app_send" else "receives"
        return f"{who}: {verb} {bytes.fromhex(event['plaintext'])!r}"
    if kind == "oob_exchange":
        return f"out-of-band exchange on frequency {event['freq_id']}" + (" (forged)" if event["forged"] else "")
    if kind in ("app_roundtrip_verified", "keys_captured", "oob_intercepted", "oob_blind", "relay_dropped",
                "relay_failed", "policy_reject", "capability_missing", "inner_pairings", "max_slots_reached",
                "app_unseal_failure"):
        extra = {k: v for k, v in event.items() if k not in ("slot", "kind", "actor")}
        detail = " ".join(f"{k}={v}" for k, v in extra.items())
        return f"{who + ': ' if who else ''}{kind}{' ' + detail if detail else ''}"
    return None


def annotate_transcript(transcript) -> str:
    lines = []
    jammed = delivered = 0
    for event in transcript:
        if event["kind"] == "radio":
            outcome = event["line"].split(",")[4]
            jammed += outcome == "JAMMED"
            delivered += outcome == "DELIVERED"
            continue
        text = describe_event(event)
        if text is not None:
            lines.append(f"[{event['slot']:>5}] {text}")
    lines.append(f"radio: {delivered} frames delivered, {jammed} jammed")
    return "\n".join(lines) + "\n"
