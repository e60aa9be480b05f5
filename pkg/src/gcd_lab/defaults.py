"""Built-in grammars and toy models."""

from .models import LmFile

BUILTIN_PREFIX = "builtin:"

# G1/G2 share the language a^n b^n; G3/G4 both generate {a,b}*.
BUILTIN_GRAMMARS: dict[str, str] = {
    "G1": "S -> 'a' S 'b' | eps\n",
    "G2": "S -> 'a' A 'b' | eps\nA -> 'a' A 'b' | eps\n",
    "G3": "S -> 'a' S | 'b' S | eps\n",
    "G4": "S0 -> S | eps\nS -> S S | 'a' | 'b'\n",
    # two-string language {a, ba} used to separate masking from conditioning
    "SEP": "S -> 'a' | 'b' 'a'\n",
}

SINGLETON_VOCAB = "singleton"

SEP_LM = LmFile.model_validate(
    {
        "vocab_ref": f"{BUILTIN_PREFIX}{SINGLETON_VOCAB}",
        "default": ["0.25", "0.25", "0.5"],
        "table": {
            "": ["0.6", "0.4", "0"],
            "a": ["0.9", "0", "0.1"],
            "b": ["0.01", "0.99", "0"],
            "b a": ["0", "0", "1"],
        },
    }
)

BUILTIN_LMS: dict[str, LmFile] = {"SEP": SEP_LM}

RANDOM_LM_PREFIX = "random:"
