from .base import (
    ChatBackend,
    EmbeddingBackend,
    LmBackend,
    NextTokenDistribution,
    SearchBackend,
    TokenLogProbs,
    TokenSequence,
)
from .local_chat import LocalChat
from .remote import RemoteChat, RemoteEmbedder, RemoteLm, RemoteSearch
from .scripted import (
    CannedChat,
    FixedEmbedder,
    RandomAcceptChat,
    ScriptedChat,
    ScriptedLm,
    classify_prompt,
)
from .search import SEARCH_ENGINES, CachedSearch, FixtureSearch, PopularityCache
from .stub_embedder import HashingEmbedder
from .stub_lm import BigramLm, split_tokens

__all__ = [
    "TokenSequence",
    "TokenLogProbs",
    "NextTokenDistribution",
    "LmBackend",
    "EmbeddingBackend",
    "ChatBackend",
    "SearchBackend",
    "BigramLm",
    "split_tokens",
    "HashingEmbedder",
    "LocalChat",
    "ScriptedLm",
    "FixedEmbedder",
    "ScriptedChat",
    "CannedChat",
    "RandomAcceptChat",
    "classify_prompt",
    "RemoteLm",
    "RemoteEmbedder",
    "RemoteChat",
    "RemoteSearch",
    "CachedSearch",
    "FixtureSearch",
    "PopularityCache",
    "SEARCH_ENGINES",
]
