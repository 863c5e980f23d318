"""draftforge: revision, completion, and error checking for rough drafts."""

__version__ = "0.1.0"

from .text import (  # noqa: F401
    MarkedText,
    Span,
    TokenizedSentence,
    insert_marks,
    parse_marked,
    split_sentences,
    tokenize,
)
from .lm import NGramLanguageModel, train  # noqa: F401
from .generate import (  # noqa: F401
    BuiltinReviser,
    CopyReviser,
    ExternalBackend,
    Hypothesis,
    diverse_beam,
    propose_edits,
)
from .revision import (  # noqa: F401
    RevisionCandidate,
    RevisionRequest,
    RevisionSettings,
    diff_highlight,
    machine_only_revise,
    rerank_and_filter,
    revise,
)
from .completion import CompletionContext, build_prefix, complete  # noqa: F401
from .checker import CheckerConfig, Diagnostic, check  # noqa: F401
from .server import Session  # noqa: F401
