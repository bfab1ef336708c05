"""veil: probabilistic data-cleaning shim over embedded SQLite.

Queries run against "lenses" (trained repair views); results come back as
annotated cursors that flag uncertain cells and rows, count possibly missing
answers, and explain any cell via seeded Monte-Carlo sampling.
"""
from .backend import Backend, BackendError, Catalog
from .cursor import AnnotatedCursor, AnnotatedRow, Explanation, Explainer
from .frontend import ParseError, parse, render_sql
from .lenses import (DOMAIN_REPAIR, SCHEMA_MATCHING, DiscreteDistribution,
                     LensDefinition, LensError)
from .normalize import CompileError, NormalForm, expand_lenses, normalize
from .oracle import OracleOverflow, enumerate_worlds_oracle
from .service import APPROVE, FIX, ServiceError, VeilDB
from .strategies import (CLASSIC, HYBRID, INLINE, PARTITION, STRATEGIES,
                         QueryTimeout, ResultSet, run_strategy)

__version__ = "1.0.0"

__all__ = [
    "Backend", "BackendError", "Catalog",
    "AnnotatedCursor", "AnnotatedRow", "Explanation", "Explainer",
    "ParseError", "parse", "render_sql",
    "DOMAIN_REPAIR", "SCHEMA_MATCHING", "DiscreteDistribution",
    "LensDefinition", "LensError",
    "CompileError", "NormalForm", "expand_lenses", "normalize",
    "OracleOverflow", "enumerate_worlds_oracle",
    "APPROVE", "FIX", "ServiceError", "VeilDB",
    "CLASSIC", "HYBRID", "INLINE", "PARTITION", "STRATEGIES",
    "QueryTimeout", "ResultSet", "run_strategy",
]
