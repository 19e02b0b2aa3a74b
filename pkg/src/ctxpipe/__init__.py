"""ctxpipe: context packages, staged pipelines, and their evidence trail.

The package is organized around four ideas:

* context packages (:mod:`ctxpipe.packages`): role-tagged collections of
  source material handed to a tool at a pipeline stage, with deterministic
  conflict resolution and size classification;
* the pipeline engine (:mod:`ctxpipe.engine`): an event-sourced state
  machine that enforces stage ordering, coverage, and routing rules;
* the audit trail (:mod:`ctxpipe.trail`): a hash-chained, append-only log
  of every state mutation, verifiable after the fact;
* the measurement layer (:mod:`ctxpipe.estimators`, :mod:`ctxpipe.dataset`,
  :mod:`ctxpipe.reports`): defect estimators and dataset aggregation for
  quality reporting.

:mod:`ctxpipe.workspace` ties these to a directory on disk, and
:mod:`ctxpipe.cli` / :mod:`ctxpipe.server` expose them to operators.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
