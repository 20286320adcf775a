"""Scene descriptions as semantic triplets.

Two front ends produce the same :class:`Query`: a line-oriented triplet DSL
and a small rule-based English reader driven by ``data/language.yaml``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

import yaml

from .scene_model import ObjectLibrary, default_library

ATOMIC_RELATIONS = ("near", "on", "above", "under", "behind", "front", "left", "right")
COMPOSITE_RELATIONS = ("next-to", "side-by-side", "in-a-row")
RELATIONS = ATOMIC_RELATIONS + COMPOSITE_RELATIONS
# relations that may be stated about a group on its own ("chairs in a row")
GROUP_RELATIONS = ("in-a-row", "side-by-side")
RELATION_ALIASES = {
    "on-left": "left",
    "on-right": "right",
    "in-front-of": "front",
    "below": "under",
    "beside": "next-to",
}
ATTRIBUTE_FLAGS = ("against-wall", "on-wall")

_NAME = r"[a-z]+(?:-[a-z]+)*"
_REF_RE = re.compile(
    rf"^(?P<cat>{_NAME})-(?P<id>\d+)(?::(?P<sub>{_NAME}))?(?:-(?P<inst>\d+))?$"
)
_GROUP_RE = re.compile(r"^group\((?P<members>[^()]*)\)$")


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    severity: str
    message: str


@dataclass(frozen=True, order=True)
class ObjectRef:
    category: str
    category_id: int
    sub_object: Optional[str] = None
    instance_index: Optional[int] = None

    @property
    def base(self) -> "ObjectRef":
        """The whole object this reference points into."""
        if self.sub_object is None:
            return self
        return ObjectRef(self.category, self.category_id, None, self.instance_index)

    def instance(self, j: int) -> "ObjectRef":
        return ObjectRef(self.category, self.category_id, self.sub_object, j)

    def __str__(self) -> str:
        s = f"{self.category}-{self.category_id}"
        if self.sub_object:
            s += f":{self.sub_object}"
        if self.instance_index is not None:
            s += f"-{self.instance_index}"
        return s

    @classmethod
    def parse(cls, text: str) -> "ObjectRef":
        m = _REF_RE.match(text.strip())
        if not m:
            raise ValueError(f"malformed object reference {text!r}")
        inst = m.group("inst")
        return cls(m.group("cat"), int(m.group("id")), m.group("sub"),
                   int(inst) if inst is not None else None)


@dataclass(frozen=True)
class GroupRef:
    """Virtual object bounded by all instances of a counted reference."""

    members: tuple[ObjectRef, ...]

    @property
    def base(self) -> "GroupRef":
        return self

    @property
    def category(self) -> str:
        return self.members[0].category

    def __str__(self) -> str:
        return "group(" + ",".join(str(m) for m in self.members) + ")"

    @classmethod
    def parse(cls, text: str) -> "GroupRef":
        m = _GROUP_RE.match(text.strip())
        if not m:
            raise ValueError(f"malformed group reference {text!r}")
        members = tuple(ObjectRef.parse(t) for t in m.group("members").split(",") if t.strip())
        if len(members) < 2:
            raise ValueError("a group needs at least two members")
        return cls(members)


Ref = Union[ObjectRef, GroupRef]


def parse_ref(text: str) -> Ref:
    text = text.strip()
    if text.startswith("group("):
        return GroupRef.parse(text)
    return ObjectRef.parse(text)


@dataclass(frozen=True)
class SemanticTriplet:
    target: Ref
    reference: Ref
    relation: str

    def __str__(self) -> str:
        return f"({self.target}, {self.reference}, {self.relation})"

    @property
    def is_group_relation(self) -> bool:
        return self.target == self.reference


@dataclass
class Query:
    triplets: list[SemanticTriplet] = field(default_factory=list)
    counts: dict[ObjectRef, int] = field(default_factory=dict)
    attributes: dict[ObjectRef, tuple[str, ...]] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list, compare=False)

    def objects(self) -> list[ObjectRef]:
        """Whole-object references, in order of first appearance."""
        return list(self.counts)

    def render(self) -> str:
        return "\n".join(str(t) for t in self.triplets)


def _canonical_relation(name: str) -> Optional[str]:
    name = name.strip().lower()
    name = RELATION_ALIASES.get(name, name)
    return name if name in RELATIONS else None


def _check_ref(ref: Ref, library: ObjectLibrary, line: Optional[int]) -> None:
    for r in (ref.members if isinstance(ref, GroupRef) else (ref,)):
        if r.category not in library:
            raise ParseError(f"unknown category {r.category!r}", line)
        if r.sub_object is not None and r.sub_object not in library[r.category].part_names():
            raise ParseError(f"{r.category} has no sub-object {r.sub_object!r}", line)


def _check_triplet(t: SemanticTriplet, line: Optional[int]) -> None:
    if t.target == t.reference and t.relation not in GROUP_RELATIONS:
        raise ParseError(f"target and reference are the same object in {t}", line)


def _bases(ref: Ref) -> list[ObjectRef]:
    if isinstance(ref, GroupRef):
        return [m.base for m in ref.members]
    return [ref.base]


# --------------------------------------------------------------------- DSL

def parse_dsl(text: str, library: Optional[ObjectLibrary] = None) -> Query:
    """Read the triplet DSL.

    One clause per line: ``target relation reference`` or the tuple form
    ``(target, reference, relation)``.  Directives ``count N ref`` and
    ``attr ref name...``; ``#`` starts a comment.
    """
    library = library or default_library()
    q = Query()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            _dsl_line(line, lineno, q, library)
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return q


def _dsl_line(line: str, lineno: int, q: Query, library: ObjectLibrary) -> None:
    if line.startswith("("):
        if not line.endswith(")"):
            raise ParseError("unterminated tuple", lineno)
        parts = _split_tuple(line[1:-1])
        if len(parts) != 3:
            raise ParseError("expected (target, reference, relation)", lineno)
        target, reference, relation = parts
    else:
        words = line.split()
        head = words[0].lower()
        if head == "count":
            if len(words) != 3:
                raise ParseError("expected: count N ref", lineno)
            try:
                n = int(words[1])
            except ValueError:
                raise ParseError(f"bad count {words[1]!r}", lineno) from None
            if n < 1:
                raise ParseError("count must be at least 1", lineno)
            ref = ObjectRef.parse(words[2])
            if ref.sub_object is not None:
                raise ParseError("counts apply to whole objects", lineno)
            _check_ref(ref, library, lineno)
            q.counts[ref] = n
            return
        if head == "attr":
            if len(words) < 3:
                raise ParseError("expected: attr ref name...", lineno)
            ref = ObjectRef.parse(words[1])
            _check_ref(ref, library, lineno)
            q.counts.setdefault(ref.base, 1)
            q.attributes[ref.base] = q.attributes.get(ref.base, ()) + tuple(words[2:])
            return
        if len(words) != 3:
            raise ParseError("expected: target relation reference", lineno)
        target, relation, reference = words
    rel = _canonical_relation(relation)
    if rel is None:
        raise ParseError(f"unknown relation {relation!r}", lineno)
    t = SemanticTriplet(parse_ref(target), parse_ref(reference), rel)
    _check_ref(t.target, library, lineno)
    _check_ref(t.reference, library, lineno)
    _check_triplet(t, lineno)
    for b in _bases(t.target) + _bases(t.reference):
        q.counts.setdefault(b, 1)
    q.triplets.append(t)


def _split_tuple(body: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


def render_dsl(q: Query) -> str:
    mentioned = set()
    for t in q.triplets:
        mentioned.update(_bases(t.target) + _bases(t.reference))
    lines = []
    for ref, n in q.counts.items():
        if n != 1 or ref not in mentioned:
            lines.append(f"count {n} {ref}")
    for ref, names in q.attributes.items():
        if names:
            lines.append(f"attr {ref} " + " ".join(names))
    for t in q.triplets:
        lines.append(f"{t.target} {t.relation} {t.reference}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- English

@dataclass(frozen=True)
class Lexicon:
    relations: Mapping[str, str]
    unary: Mapping[str, str]
    numbers: Mapping[str, int]
    new_determiners: frozenset
    back_determiners: frozenset
    fillers: frozenset
    nouns: Mapping[tuple[str, ...], str]
    part_link: str = "of"

    @classmethod
    def load(cls, path: Optional[Path | str] = None,
             library: Optional[ObjectLibrary] = None) -> "Lexicon":
        if path is None:
            text = resources.files(__package__).joinpath("data/language.yaml").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        data = yaml.safe_load(text)
        nouns = {}
        for cat, forms in data.get("nouns", {}).items():
            for form in list(forms) + [cat, cat.replace("-", " ")]:
                nouns[tuple(form.split())] = cat
        for cat in (library or default_library()):
            nouns.setdefault(tuple(cat.replace("-", " ").split()), cat)
            nouns.setdefault((cat,), cat)
        return cls(
            relations=data["relations"],
            unary=data.get("unary", {}),
            numbers=data.get("numbers", {}),
            new_determiners=frozenset(data.get("new_determiners", ())),
            back_determiners=frozenset(data.get("back_determiners", ())),
            fillers=frozenset(data.get("fillers", ())),
            nouns=nouns,
            part_link=data.get("part_link", "of"),
        )


_WORD_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")


def _find_phrase(words: list[str], phrases: Mapping[str, str]):
    """Leftmost-longest phrase match: (start, end, value) or None."""
    split = sorted(((p.split(), v) for p, v in phrases.items()), key=lambda pv: -len(pv[0]))
    for i in range(len(words)):
        for toks, value in split:
            if words[i:i + len(toks)] == toks:
                return i, i + len(toks), value
    return None


class _Reader:
    def __init__(self, library: ObjectLibrary, lexicon: Lexicon):
        self.library = library
        self.lex = lexicon
        self.ids: dict[str, int] = {}
        self.query = Query()

    def sentence(self, text: str, lineno: int) -> None:
        words = _WORD_RE.findall(text.lower())
        if not words:
            return
        binary = _find_phrase(words, self.lex.relations)
        unary = _find_phrase(words, self.lex.unary)
        # a unary phrase wins when it is at least as long and ends the sentence
        if unary and unary[1] == len(words) and (
            binary is None or unary[1] - unary[0] >= binary[1] - binary[0] or binary[0] >= unary[0]
        ):
            ref = self.noun_phrase(words[:unary[0]], lineno)
            value = unary[2]
            if value in ATTRIBUTE_FLAGS:
                base = ref.base
                if value not in self.query.attributes.get(base, ()):
                    self.query.attributes[base] = self.query.attributes.get(base, ()) + (value,)
            else:
                self.query.triplets.append(SemanticTriplet(ref.base, ref.base, value))
            return
        if binary is None:
            if words[0] == "there":
                self.noun_phrase(words[1:], lineno)
                return
            self.query.diagnostics.append(
                Diagnostic(lineno, "warning", f"no spatial relation found in {text.strip()!r}; skipped")
            )
            return
        start, end, rel = binary
        target = self.noun_phrase(words[:start], lineno)
        reference = self.noun_phrase(words[end:], lineno)
        t = SemanticTriplet(target, reference, rel)
        _check_triplet(t, lineno)
        self.query.triplets.append(t)

    def noun_phrase(self, words: list[str], lineno: int) -> ObjectRef:
        words = [w for w in words if w not in self.lex.fillers]
        if not words:
            raise ParseError("missing object", lineno)

        count, new = 1, None
        i = 0
        # determiners and number words, possibly multi-word ("a pair of")
        while i < len(words):
            num = _find_phrase(words[i:], self.lex.numbers)
            if num and num[0] == 0:
                count = num[2]
                new = True
                i += num[1]
                continue
            if words[i].isdigit():
                count, new = int(words[i]), True
                i += 1
                continue
            if words[i] in self.lex.new_determiners:
                new = True
                i += 1
                continue
            if words[i] in self.lex.back_determiners:
                new = False
                i += 1
                continue
            break
        link = self.lex.part_link
        if link in words[i:]:
            j = words.index(link, i)
            whole = self.noun_phrase(words[j + 1:], lineno)
            part = "-".join(words[i:j])
            if part not in self.library[whole.category].part_names():
                raise ParseError(f"{whole.category} has no part {part!r}", lineno)
            return ObjectRef(whole.category, whole.category_id, part)
        rest = words[i:]
        cat, adjectives = None, []
        for j in range(len(rest)):
            for n in range(len(rest) - j, 0, -1):
                key = tuple(rest[j:j + n])
                if key in self.lex.nouns:
                    cat = self.lex.nouns[key]
                    adjectives = rest[:j]
                    break
            if cat:
                break
        if cat is None:
            raise ParseError(f"unknown object {' '.join(words)!r}", lineno)
        if cat not in self.library:
            raise ParseError(f"unknown category {cat!r}", lineno)

        if new is None:
            new = True
        if not new and cat in self.ids:
            ref = ObjectRef(cat, self.ids[cat] - 1)
        else:
            ref = ObjectRef(cat, self.ids.get(cat, 0))
            self.ids[cat] = ref.category_id + 1
        self.query.counts.setdefault(ref, 1)
        if count > 1:
            self.query.counts[ref] = count
        variants = self.library[cat].variants
        attrs = tuple(a for a in adjectives if a in variants)
        if attrs:
            old = self.query.attributes.get(ref, ())
            self.query.attributes[ref] = old + tuple(a for a in attrs if a not in old)
        return ref


_SENTENCE_RE = re.compile(r"[.;!?\n]+")


def parse_english(text: str, library: Optional[ObjectLibrary] = None,
                  lexicon: Optional[Lexicon] = None) -> Query:
    """Read plain English sentences.

    "the X" refers back to the most recent X; "a/another X" introduces a new
    one.  Sentences without a recognised relation are skipped with a warning
    diagnostic.
    """
    library = library or default_library()
    lexicon = lexicon or Lexicon.load(library=library)
    reader = _Reader(library, lexicon)
    for lineno, sentence in enumerate(_SENTENCE_RE.split(text), 1):
        if sentence.strip():
            reader.sentence(sentence, lineno)
    return reader.query


# ------------------------------------------------------------- expansion

def expand_counts(q: Query) -> Query:
    """Replace counted references by explicit instances.

    A counted target yields one triplet per instance; a counted reference
    becomes a :class:`GroupRef` over all instances.
    """
    for ref, n in q.counts.items():
        if n < 1:
            raise ValueError(f"count of {ref} must be at least 1, got {n}")

    def instances(ref: ObjectRef) -> list[ObjectRef]:
        n = q.counts.get(ref.base, 1)
        if n == 1:
            return [ref]
        return [ref.instance(j) for j in range(n)]

    def as_reference(ref: Ref) -> Ref:
        if isinstance(ref, GroupRef):
            return ref
        inst = instances(ref.base)
        if len(inst) == 1:
            return ref
        return GroupRef(tuple(inst))

    out = Query(diagnostics=list(q.diagnostics))
    for ref in q.counts:
        for r in instances(ref):
            out.counts[r] = 1
            if ref in q.attributes:
                out.attributes[r] = q.attributes[ref]
    for t in q.triplets:
        if t.is_group_relation:
            group = as_reference(t.target)
            out.triplets.append(SemanticTriplet(group, group, t.relation))
            continue
        reference = as_reference(t.reference)
        targets = [t.target] if isinstance(t.target, GroupRef) else instances(t.target)
        for target in targets:
            out.triplets.append(SemanticTriplet(target, reference, t.relation))
    return out
