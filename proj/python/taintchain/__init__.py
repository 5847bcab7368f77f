"""Taint-style vulnerability detection over decompiled programs.

Exports, VDs, chains and flows are plain dicts in the same JSON shapes the
command line tool writes. Source and sink specs are "(name; selector)" strings.
"""

import json
import os

from . import _taintchain as _core

LoadError = _core.LoadError
ScoringError = _core.ScoringError
PromptError = _core.PromptError

__all__ = [
    "LoadError",
    "PromptError",
    "ScoringError",
    "dangerous_flows",
    "extract_verdict",
    "load",
    "locate_vds",
    "prompt_sequence",
    "run",
    "score",
    "score_run",
    "slice_chains",
    "validate",
]


def _text(value):
    return value if isinstance(value, str) else json.dumps(value)


def _specs(specs):
    if isinstance(specs, str):
        return specs
    return "\n".join(specs)


def validate(export):
    """Diagnostics for an export; empty when every invariant holds."""
    return json.loads(_core.validate(_text(export)))


def load(path):
    """Loads an export file. Returns (program, diagnostics)."""
    loaded = json.loads(_core.load(os.fspath(path)))
    return loaded["program"], loaded["diagnostics"]


def locate_vds(export, sinks):
    return json.loads(_core.locate_vds(_text(export), _specs(sinks)))


def slice_chains(export, vd, sources=(), depth_limit=50):
    """Call chains ending at `vd`. Sources only add their write effects."""
    result = json.loads(_core.backward_slice(_text(export), _text(vd), _specs(sources), depth_limit))
    return result["chains"]


def dangerous_flows(export, chains, sources, subject=""):
    return json.loads(_core.dangerous_flows(_text(export), _text(chains), _specs(sources), subject))


def prompt_sequence(export, flow):
    return json.loads(_core.prompt_sequence(_text(export), _text(flow)))


def extract_verdict(reply):
    """Returns (vulnerable, cwe_tags) with vulnerable in yes/no/indeterminate."""
    vulnerable, tags = _core.extract_verdict(reply)
    return vulnerable, list(tags)


def score(verdicts, labels):
    return json.loads(_core.score(_text(verdicts), _text(labels)))


def run(exports, out_dir, **options):
    """Full pipeline into `out_dir`. Options mirror the CLI flags, e.g.
    backend="mock", mock_script=..., labels=..., rounds=2, jobs=4."""
    if isinstance(exports, (str, os.PathLike)):
        exports = [exports]
    opts = {k: os.fspath(v) if isinstance(v, os.PathLike) else v for k, v in options.items()}
    _core.run([os.fspath(e) for e in exports], os.fspath(out_dir), json.dumps(opts))


def score_run(run_dir, labels):
    return json.loads(_core.score_run(os.fspath(run_dir), os.fspath(labels)))
