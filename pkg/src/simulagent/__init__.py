"""Simultaneous translation with a policy-decision agent and a translation agent."""

__version__ = "0.1.0"

from .agents import (  # noqa: E402
    Decision,
    EchoAgent,
    Memory,
    OracleAgent,
    PromptTemplate,
    RemoteAgent,
    ScheduledPolicyAgent,
    WaitKWordAgent,
    render_prompt,
)
from .core import (  # noqa: E402
    AlignmentSet,
    BoundaryConfig,
    SentencePair,
    TokenPolicy,
    Tokenization,
    WordPolicy,
)
from .metrics import (  # noqa: E402
    average_lagging,
    corpus_bleu,
    count_nonmonotonic,
    difficulty_split,
    hallucination_rate,
)
from .orchestrator import SessionLimits, Transcript, measure_speed, replay_policy, run_session  # noqa: E402
from .policy import (  # noqa: E402
    apply_boundary_restrictions,
    to_word_policy,
    validate_and_repair,
    wait_k_token_policy,
)
from .tokenization import TokenizerScheme, complete_words_in_prefix, split_words, tokenize  # noqa: E402
