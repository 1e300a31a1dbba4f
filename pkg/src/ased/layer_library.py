"""Layer operation alphabet: the discrete set of layer types a network position can take.

Each library entry binds a shorthand token (``c3``, ``m2``, ...) to the
geometry of the operation: kernel size, stride, dilation and padding
behaviour.  Convolutions are zero-padded so that spatial dimensions are
preserved; only pooling entries downsample.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class LayerKind(Enum):
    IDENTITY = "identity"
    CONVOLUTION = "convolution"
    DILATED_CONVOLUTION = "dilated_convolution"
    MAX_POOL = "max_pool"
    AVG_POOL = "avg_pool"


_CONV_KINDS = (LayerKind.CONVOLUTION, LayerKind.DILATED_CONVOLUTION)
_POOL_KINDS = (LayerKind.MAX_POOL, LayerKind.AVG_POOL)


class UnknownShorthand(KeyError):
    """Raised when a shorthand token does not name a library entry."""


@dataclass(frozen=True)
class LayerType:
    shorthand: str
    kind: LayerKind
    kernel: int = 1
    stride: int = 1
    dilation: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.dilation < 1:
            raise ValueError(f"invalid geometry for {self.shorthand!r}")
        if self.kind is LayerKind.IDENTITY and (self.kernel, self.stride, self.dilation) != (1, 1, 1):
            raise ValueError("identity must have kernel=stride=dilation=1")
        if self.kind in _CONV_KINDS and self.stride != 1:
            raise ValueError("convolutions have stride 1; only pooling downsamples")

    @property
    def is_downsampling(self) -> bool:
        return self.kind in _POOL_KINDS

    @property
    def padding(self) -> int:
        """Spatial padding applied on each side.

        Convolutions get enough padding to preserve the input dimensions
        (accounting for dilation).  Pooling uses (kernel-1)//2, so a 2x2
        pool is unpadded (output floor(n/2)) while a 3x3 stride-2 pool
        keeps odd inputs valid (output ceil(n/2)).
        """
        if self.kind in _CONV_KINDS:
            effective = (self.kernel - 1) * self.dilation + 1
            return (effective - 1) // 2
        if self.kind in _POOL_KINDS:
            return (self.kernel - 1) // 2
        return 0

    def output_size(self, size: int) -> int:
        """Output spatial extent along one dimension for an input of `size`.

        May return a value < 1 for pooling on tiny inputs; callers decide
        how to treat such infeasible applications.
        """
        if not self.is_downsampling:
            return size
        return (size + 2 * self.padding - self.kernel) // self.stride + 1


_TOKEN_RE = re.compile(r"^(id|[cdma])(\d*)$")


def parse_token(token: str) -> LayerType:
    """Builds the LayerType described by one shorthand token.

    Grammar: ``id`` identity; ``cK`` KxK convolution; ``dK`` KxK dilated
    convolution (rate 2); ``mK`` / ``aK`` KxK max / average pooling with
    stride 2.
    """
    m = _TOKEN_RE.match(token)
    if not m:
        raise UnknownShorthand(token)
    head, digits = m.groups()
    if head == "id":
        if digits:
            raise UnknownShorthand(token)
        return LayerType("id", LayerKind.IDENTITY)
    if not digits:
        raise UnknownShorthand(token)
    kernel = int(digits)
    if kernel < 1:
        raise UnknownShorthand(token)
    if head == "c":
        return LayerType(token, LayerKind.CONVOLUTION, kernel=kernel)
    if head == "d":
        return LayerType(token, LayerKind.DILATED_CONVOLUTION, kernel=kernel, dilation=2)
    if head == "m":
        return LayerType(token, LayerKind.MAX_POOL, kernel=kernel, stride=2)
    return LayerType(token, LayerKind.AVG_POOL, kernel=kernel, stride=2)


@dataclass(frozen=True)
class LayerLibrary:
    entries: tuple[LayerType, ...]

    def __post_init__(self):
        if len(self.entries) < 2:
            raise ValueError("a layer library needs at least 2 entries")
        tokens = [e.shorthand for e in self.entries]
        if len(set(tokens)) != len(tokens):
            raise ValueError("shorthand tokens must be unique")

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(e.shorthand for e in self.entries)

    def lookup(self, shorthand: str) -> LayerType:
        for e in self.entries:
            if e.shorthand == shorthand:
                return e
        raise UnknownShorthand(shorthand)

    def index_of(self, shorthand: str) -> int:
        for i, e in enumerate(self.entries):
            if e.shorthand == shorthand:
                return i
        raise UnknownShorthand(shorthand)

    @property
    def identity_index(self) -> int | None:
        """Index of the identity entry, or None if the library lacks one."""
        for i, e in enumerate(self.entries):
            if e.kind is LayerKind.IDENTITY:
                return i
        return None


_DEFAULT_TOKENS = ("id", "c1", "c3", "c5", "c7", "d3", "d5", "m2", "m3", "a3")


def default_library() -> LayerLibrary:
    """The frozen 10-entry default library.

    Order: identity, 1x1/3x3/5x5/7x7 convolutions, 3x3/5x5 dilated
    convolutions (rate 2), 2x2 max pooling, 3x3 max pooling and 3x3
    average pooling (both stride 2).
    """
    return LayerLibrary(tuple(parse_token(t) for t in _DEFAULT_TOKENS))


def library_from_tokens(tokens) -> LayerLibrary:
    """Reconstructs a library from its serialized ordered token list."""
    return LayerLibrary(tuple(parse_token(t) for t in tokens))


def lookup(library: LayerLibrary, shorthand: str) -> LayerType:
    return library.lookup(shorthand)
