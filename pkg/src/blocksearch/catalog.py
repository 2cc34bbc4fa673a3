"""Block catalog: the 12 block modules and 2 terminators, and their codes.

Block codes are small ints. 0..11 name the block modules, 12 is global
average pooling (GAP) and 13 is the softmax classifier (SM). The internal
layer composition of each block is loaded from a template file shipped with
the package (``data/blocks.cfg``) so it can be corrected without code
changes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

N_BLOCKS = 12
GAP = 12
SM = 13

DENSE = "dense"
RESIDUAL = "residual"
INCEPTION = "inception"

CONCAT_NONE = "none"
CONCAT_FINAL = "final"
CONCAT_EVERY = "every"

# Composite conv order: dense blocks pre-activate, everything else
# post-activates.
ORDER_BN_RELU_CONV = "bn-relu-conv"
ORDER_CONV_BN_RELU = "conv-bn-relu"


class CatalogError(ValueError):
    """Malformed catalog template or block code."""


@dataclass(frozen=True)
class BranchAtom:
    """One step of an inception branch: a conv or a stride-1 avg pool."""

    op: str          # "conv" | "avgpool"
    kernel: int
    filters: int = 0  # conv only


@dataclass(frozen=True)
class BlockSpec:
    """Structural description of one block module."""

    code: int
    family: str
    unit_count: int
    concat_mode: str
    channel_profile: tuple[int, ...]
    spatial_factor: Fraction
    # dense family only
    growth_rate: int = 0
    dense_layers_per_block: int = 0
    # inception family only: one tuple of atoms per parallel branch
    branches: tuple[tuple[BranchAtom, ...], ...] = ()

    @property
    def conv_order(self) -> str:
        return ORDER_BN_RELU_CONV if self.family == DENSE else ORDER_CONV_BN_RELU


@dataclass(frozen=True)
class TerminatorSpec:
    """Descriptor for one of the two terminal choices."""

    code: int
    name: str


def is_block(code: int) -> bool:
    return 0 <= code < N_BLOCKS


def is_terminator(code: int) -> bool:
    return code in (GAP, SM)


def format_code(code: int, classes: int = 10) -> str:
    """Render a code in net-string notation: B(n), GAP(c) or SM(c)."""
    if is_block(code):
        return f"B({code})"
    if code == GAP:
        return f"GAP({classes})"
    if code == SM:
        return f"SM({classes})"
    raise CatalogError(f"unknown block code {code!r}")


_CODE_RE = re.compile(r"^(B|GAP|SM)\((\d+)\)$")


def parse_code(text: str) -> int:
    """Inverse of :func:`format_code`; raises on anything else."""
    m = _CODE_RE.match(text)
    if m is None:
        raise CatalogError(f"malformed block code {text!r}")
    tag, num = m.group(1), int(m.group(2))
    if tag == "B":
        if not is_block(num):
            raise CatalogError(f"block code out of range in {text!r}")
        return num
    return GAP if tag == "GAP" else SM


def parse_code_classes(text: str) -> tuple[int, int | None]:
    """Like :func:`parse_code` but also returns the class count, if any."""
    code = parse_code(text)
    if is_terminator(code):
        return code, int(_CODE_RE.match(text).group(2))
    return code, None


def default_template_path() -> Path:
    return Path(str(resources.files("blocksearch").joinpath("data/blocks.cfg")))


def _parse_branch(value: str, lineno: int) -> tuple[BranchAtom, ...]:
    atoms = []
    for tok in value.split():
        m = re.match(r"^conv(\d)x(\d):(\d+)$", tok)
        if m:
            k1, k2, f = int(m.group(1)), int(m.group(2)), int(m.group(3))
            if k1 != k2 or f < 1:
                raise CatalogError(f"line {lineno}: bad conv atom {tok!r}")
            atoms.append(BranchAtom("conv", k1, f))
            continue
        m = re.match(r"^avgpool(\d)x(\d)$", tok)
        if m:
            if m.group(1) != m.group(2):
                raise CatalogError(f"line {lineno}: bad pool atom {tok!r}")
            atoms.append(BranchAtom("avgpool", int(m.group(1))))
            continue
        raise CatalogError(f"line {lineno}: unknown branch atom {tok!r}")
    if not atoms:
        raise CatalogError(f"line {lineno}: empty branch")
    return tuple(atoms)


def _build_spec(code: int, fields: dict, branch_lines: list) -> BlockSpec:
    family = fields.get("family")
    concat = fields.get("concat")
    if family not in (DENSE, RESIDUAL, INCEPTION):
        raise CatalogError(f"block {code}: unknown family {family!r}")
    if concat not in (CONCAT_NONE, CONCAT_FINAL, CONCAT_EVERY):
        raise CatalogError(f"block {code}: unknown concat mode {concat!r}")

    if family == DENSE:
        growth = int(fields["growth"])
        layers = int(fields["layers_per_subblock"])
        sub = int(fields["subblocks"])
        return BlockSpec(
            code=code,
            family=DENSE,
            unit_count=sub,
            concat_mode=concat,
            channel_profile=(growth,) * sub,
            # each sub-block's transition halves the spatial dims
            spatial_factor=Fraction(1, 2 ** sub),
            growth_rate=growth,
            dense_layers_per_block=layers,
        )
    if family == RESIDUAL:
        filters = tuple(int(x) for x in fields["filters"].split(","))
        return BlockSpec(
            code=code,
            family=RESIDUAL,
            unit_count=len(filters),
            concat_mode=concat,
            channel_profile=filters,
            spatial_factor=Fraction(1),
        )
    branches = tuple(branch_lines)
    if not branches:
        raise CatalogError(f"block {code}: inception block without branches")
    total = sum(br[-1].filters for br in branches)
    return BlockSpec(
        code=code,
        family=INCEPTION,
        unit_count=1,
        concat_mode=concat,
        channel_profile=(total,),
        spatial_factor=Fraction(1),
        branches=branches,
    )


def load_catalog(path: str | Path | None = None) -> list[BlockSpec | TerminatorSpec]:
    """Parse a catalog template file into 12 BlockSpecs plus 2 terminators."""
    path = Path(path) if path is not None else default_template_path()
    blocks: dict[int, BlockSpec] = {}
    current: int | None = None
    fields: dict[str, str] = {}
    branch_lines: list[tuple[BranchAtom, ...]] = []

    def flush():
        if current is None:
            return
        if current in blocks:
            raise CatalogError(f"duplicate [block {current}] record")
        blocks[current] = _build_spec(current, fields, branch_lines)

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^\[block (\d+)\]$", line)
        if m:
            flush()
            current = int(m.group(1))
            if not is_block(current):
                raise CatalogError(f"line {lineno}: block code {current} out of range")
            fields, branch_lines = {}, []
            continue
        if "=" not in line:
            raise CatalogError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "version":
            if current is not None:
                raise CatalogError(f"line {lineno}: version inside a block record")
            continue
        if current is None:
            raise CatalogError(f"line {lineno}: {key!r} outside any block record")
        if key == "branch":
            branch_lines.append(_parse_branch(value, lineno))
        else:
            fields[key] = value
    flush()

    if sorted(blocks) != list(range(N_BLOCKS)):
        missing = sorted(set(range(N_BLOCKS)) - set(blocks))
        raise CatalogError(f"catalog template missing blocks {missing}")
    out: list[BlockSpec | TerminatorSpec] = [blocks[i] for i in range(N_BLOCKS)]
    out.append(TerminatorSpec(GAP, "GAP"))
    out.append(TerminatorSpec(SM, "SM"))
    return out


_DEFAULT: list[BlockSpec | TerminatorSpec] | None = None


def catalog() -> list[BlockSpec | TerminatorSpec]:
    """The default catalog (immutable; loaded once)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT
