"""Word observations, the channelled vocabulary, and the word-stream text format.

A word-stream file looks like::

    ROSTWORDS v1 V=1020 channels=hue:12+intensity:8+texton:1000
    # comments are allowed anywhere after the header
    0,64,64,3
    0,80,64,17

Each body line is ``t,x,y,word``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

MAGIC = "ROSTWORDS"
VERSION = "v1"


class StreamFormatError(ValueError):
    """Raised for malformed word-stream input or invalid observation sequences."""


@dataclass(frozen=True, order=True)
class WordObservation:
    t: int
    x: int
    y: int
    word: int


@dataclass(frozen=True)
class VocabularyLayout:
    channels: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.channels:
            raise ValueError("vocabulary needs at least one channel")
        seen = set()
        for name, size in self.channels:
            if not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
                raise ValueError(f"bad channel name {name!r}")
            if name in seen:
                raise ValueError(f"duplicate channel {name!r}")
            if int(size) <= 0:
                raise ValueError(f"channel {name!r} must have positive size")
            seen.add(name)

    @classmethod
    def single(cls, size: int, name: str = "words") -> "VocabularyLayout":
        return cls(((name, int(size)),))

    @property
    def V(self) -> int:
        return sum(size for _, size in self.channels)

    @property
    def offsets(self) -> dict[str, int]:
        out, acc = {}, 0
        for name, size in self.channels:
            out[name] = acc
            acc += size
        return out

    def size_of(self, channel: str) -> int:
        return dict(self.channels)[channel]

    def global_id(self, channel: str, local: int) -> int:
        size = self.size_of(channel)
        if not 0 <= local < size:
            raise ValueError(f"local index {local} outside channel {channel!r} of size {size}")
        return self.offsets[channel] + local

    def locate(self, word: int) -> tuple[str, int]:
        """Inverse of :meth:`global_id`."""
        acc = 0
        for name, size in self.channels:
            if word < acc + size:
                if word < acc:
                    break
                return name, word - acc
            acc += size
        raise ValueError(f"word {word} outside vocabulary of size {self.V}")

    def header(self) -> str:
        chans = "+".join(f"{n}:{s}" for n, s in self.channels)
        return f"{MAGIC} {VERSION} V={self.V} channels={chans}"


def _parse_header(line: str) -> VocabularyLayout:
    tokens = [tok for tok in re.split(r"[;\s]+", line.strip()) if tok]
    if tokens[:1] == [MAGIC]:
        if tokens[1:2] != [VERSION]:
            raise StreamFormatError(f"line 1: unsupported stream version {tokens[1:2]}")
        tokens = tokens[2:]
    fields = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise StreamFormatError(f"line 1: malformed header token {tok!r}")
        fields[key] = value
    if "V" not in fields or "channels" not in fields:
        raise StreamFormatError("line 1: header must declare V= and channels=")
    try:
        V = int(fields["V"])
        channels = []
        for part in fields["channels"].split("+"):
            name, _, size = part.partition(":")
            channels.append((name, int(size)))
        layout = VocabularyLayout(tuple(channels))
    except ValueError as exc:
        raise StreamFormatError(f"line 1: malformed header: {exc}") from None
    if layout.V != V:
        raise StreamFormatError(f"line 1: V={V} but channel sizes sum to {layout.V}")
    return layout


def parse_stream(source: bytes | str) -> tuple[list[WordObservation], VocabularyLayout]:
    """Parse a word-stream file into observations (file order) and its vocabulary layout."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StreamFormatError(f"stream is not UTF-8: {exc}") from None
    lines = source.splitlines()
    # the header is the first non-blank line
    lineno = 0
    while lineno < len(lines) and not lines[lineno].strip():
        lineno += 1
    if lineno == len(lines):
        raise StreamFormatError("line 1: missing header")
    layout = _parse_header(lines[lineno])
    V = layout.V
    obs = []
    last_t = -1
    for n, raw in enumerate(lines[lineno + 1 :], start=lineno + 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise StreamFormatError(f"line {n}: expected t,x,y,word")
        try:
            t, x, y, word = (int(p) for p in parts)
        except ValueError:
            raise StreamFormatError(f"line {n}: non-integer field") from None
        if min(t, x, y, word) < 0:
            raise StreamFormatError(f"line {n}: negative field")
        if word >= V:
            raise StreamFormatError(f"line {n}: word out of range ({word} >= V={V})")
        if t < last_t:
            raise StreamFormatError(f"line {n}: frame index decreases ({t} after {last_t})")
        last_t = t
        obs.append(WordObservation(t, x, y, word))
    return obs, layout


def validate(observations: Iterable[WordObservation], layout: VocabularyLayout) -> None:
    last_t = -1
    V = layout.V
    for i, o in enumerate(observations):
        if min(o.t, o.x, o.y, o.word) < 0:
            raise StreamFormatError(f"observation {i}: negative field")
        if o.word >= V:
            raise StreamFormatError(f"observation {i}: word out of range ({o.word} >= V={V})")
        if o.t < last_t:
            raise StreamFormatError(f"observation {i}: observations not sorted by t")
        last_t = o.t


def write_stream(observations: Sequence[WordObservation], layout: VocabularyLayout) -> bytes:
    validate(observations, layout)
    lines = [layout.header()]
    lines.extend(f"{o.t},{o.x},{o.y},{o.word}" for o in observations)
    return ("\n".join(lines) + "\n").encode("utf-8")
