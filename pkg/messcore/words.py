"""Free-group word algebra on single-letter generators.

Lowercase letters are generators and the matching uppercase letters their
inverses, so "abAB" is the commutator [a, b].
"""

from __future__ import annotations


def invert_gen(generator: str) -> str:
    if generator.lower() == generator:
        return generator.upper()
    return generator.lower()


def formal_inverse(word: str) -> str:
    return "".join(invert_gen(g) for g in word[::-1])


def simplify_word(word: str) -> str:
    """Freely reduce a word."""
    simp: list[str] = []
    for let in word:
        if simp and let == invert_gen(simp[-1]):
            simp.pop()
        else:
            simp.append(let)
    return "".join(simp)


def cyclically_reduce(word: str) -> str:
    word = simplify_word(word)
    while len(word) > 1 and word[0] == invert_gen(word[-1]):
        word = word[1:-1]
    return word


def commutator(w1: str, w2: str) -> str:
    return simplify_word(w1 + w2 + formal_inverse(w1) + formal_inverse(w2))


def rotations(word: str) -> set[str]:
    return {word[i:] + word[:i] for i in range(len(word))} if word else {""}


def is_cyclic_conjugate(w1: str, w2: str) -> bool:
    """True if the cyclic reductions of w1 and w2 are rotations of each other."""
    r1, r2 = cyclically_reduce(w1), cyclically_reduce(w2)
    return len(r1) == len(r2) and r1 in rotations(r2)


def substitute(word: str, images: dict[str, str]) -> str:
    """Apply a generator substitution (images of lowercase letters) to a word."""
    out = []
    for let in word:
        if let in images:
            out.append(images[let])
        else:
            out.append(formal_inverse(images[let.lower()]))
    return simplify_word("".join(out))


def abelianize(word: str, generators: str) -> tuple[int, ...]:
    counts = dict.fromkeys(generators, 0)
    for let in word:
        if let in counts:
            counts[let] += 1
        else:
            counts[let.lower()] -= 1
    return tuple(counts[g] for g in generators)
