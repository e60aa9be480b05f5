"""Resolution of grammar, vocabulary, model and workload references."""

from __future__ import annotations

import hashlib
from pathlib import Path

from .decoding import RandomLm, ToyLm, load_lm, parse_lm_file, table_lm_from_file
from .defaults import (
    BUILTIN_GRAMMARS,
    BUILTIN_LMS,
    BUILTIN_PREFIX,
    RANDOM_LM_PREFIX,
    SINGLETON_VOCAB,
)
from .errors import GrammarError, LmFileError, VocabError
from .grammar import Cfg, parse_grammar, reduce_grammar
from .models import LabConfig
from .tokens import Vocab, load_vocab


def _digest(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


class InputRegistry:
    """Resolves ``builtin:NAME`` references and file paths to lab objects.

    Every resolved input is recorded with the sha256 of its content so that runs
    can be reproduced from their manifest.
    """

    def __init__(self, config: LabConfig | None = None, fixtures: Path | None = None) -> None:
        self.config = config or LabConfig()
        self.fixtures = fixtures
        self.digests: dict[str, str] = {}

    @staticmethod
    def builtin_grammars() -> list[str]:
        return sorted(BUILTIN_GRAMMARS)

    def grammar_source(self, ref: str) -> str:
        """Grammar text for ``ref``; fixtures named ``NAME.cfg`` override built-ins."""
        if ref.startswith(BUILTIN_PREFIX):
            name = ref[len(BUILTIN_PREFIX) :]
            if self.fixtures is not None and (self.fixtures / f"{name}.cfg").exists():
                return self._read(self.fixtures / f"{name}.cfg", GrammarError)
            if name not in BUILTIN_GRAMMARS:
                raise GrammarError(
                    f"unknown built-in grammar '{name}'; available: "
                    + ", ".join(self.builtin_grammars())
                )
            return BUILTIN_GRAMMARS[name]
        return self._read(Path(ref), GrammarError)

    def grammar(self, ref: str) -> Cfg:
        """Parse and reduce the grammar named by ``ref``."""
        text = self.grammar_source(ref)
        self.digests[ref] = _digest(text)
        return reduce_grammar(parse_grammar(text))

    def vocab(self, ref: str | None, g: Cfg) -> Vocab:
        if ref is None or ref == f"{BUILTIN_PREFIX}{SINGLETON_VOCAB}":
            return Vocab.singleton(g)
        if ref.startswith(BUILTIN_PREFIX):
            raise VocabError(f"unknown built-in vocabulary '{ref}'")
        path = Path(ref)
        vocab = load_vocab(path)
        self.digests[ref] = _digest(path.read_bytes())
        return vocab

    def lm(self, ref: str, vocab: Vocab) -> ToyLm:
        """Toy model for ``ref``: ``builtin:NAME``, ``random:SEED`` or a model file."""
        if ref.startswith(RANDOM_LM_PREFIX):
            raw = ref[len(RANDOM_LM_PREFIX) :]
            try:
                seed = int(raw)
            except ValueError as e:
                raise LmFileError(f"invalid random model seed '{raw}'") from e
            return RandomLm(vocab.size, seed)
        if ref.startswith(BUILTIN_PREFIX):
            name = ref[len(BUILTIN_PREFIX) :]
            if name not in BUILTIN_LMS:
                raise LmFileError(f"unknown built-in model '{name}'")
            lm_file = BUILTIN_LMS[name]
            self.digests[ref] = _digest(lm_file.model_dump_json())
            return table_lm_from_file(lm_file, vocab)
        path = Path(ref)
        lm = load_lm(path, vocab)
        self.digests[ref] = _digest(path.read_bytes())
        return lm

    def lm_vocab_ref(self, ref: str) -> str | None:
        """Vocabulary a model file declares, if any."""
        if ref.startswith(RANDOM_LM_PREFIX):
            return None
        if ref.startswith(BUILTIN_PREFIX):
            lm_file = BUILTIN_LMS.get(ref[len(BUILTIN_PREFIX) :])
            return lm_file.vocab_ref if lm_file else None
        return parse_lm_file(self._read(Path(ref), LmFileError)).vocab_ref

    def workload(self, path: Path) -> list[tuple[str, ...]]:
        """One whitespace-separated terminal string per line; ``eps`` is the empty string.

        Blank lines and ``#`` comments are skipped.
        """
        text = self._read(path, GrammarError)
        self.digests[str(path)] = _digest(text)
        strings = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            strings.append(() if line == "eps" else tuple(line.split()))
        return strings

    def record(self, ref: str, data: str | bytes) -> None:
        self.digests[ref] = _digest(data)

    @staticmethod
    def _read(path: Path, error: type[GrammarError] | type[LmFileError]) -> str:
        try:
            return path.read_text(encoding="utf-8")
        except OSError as e:
            raise error(f"cannot read {path}: {e}") from e
