"""Named atoms with their declared luma/chroma bases."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .atoms import BAYER, CANONICAL, RGBCY, ColorAtom, LumaChromaBasis, basis_by_name, bayer_grbg, rgbcy_atom
from .demosaic import extract_carriers

__all__ = ["AtomLibrary", "LibraryEntry", "load_atom_file", "resolve_basis"]


@dataclass(frozen=True)
class LibraryEntry:
    atom: ColorAtom
    basis: LumaChromaBasis


def resolve_basis(spec) -> LumaChromaBasis:
    """A basis from a name, a JSON file path, a ``{"T": ...}`` dict or a basis."""
    if isinstance(spec, LumaChromaBasis):
        return spec
    if isinstance(spec, dict):
        return LumaChromaBasis.from_rows(spec["T"], name=spec.get("name", "custom"))
    p = Path(str(spec))
    if p.suffix == ".json" or p.is_file():
        return LumaChromaBasis.load(p)
    return basis_by_name(str(spec))


def load_atom_file(path) -> LibraryEntry:
    """Load an atom JSON; an optional ``"basis"`` key (name or ``T``) declares its basis."""
    path = Path(path)
    atom = ColorAtom.load(path)
    d = json.loads(path.read_text())
    basis = resolve_basis(d["basis"]) if "basis" in d else CANONICAL
    return LibraryEntry(atom, basis)


@dataclass
class AtomLibrary:
    """Built-in Bayer and RGBCY atoms plus user-registered entries.

    Every entry is checked to be a valid atom that admits a carrier plan
    under its basis.
    """

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            self.register("bayer", bayer_grbg(), BAYER)
            self.register("rgbcy", rgbcy_atom(), RGBCY)

    def register(self, name: str, atom: ColorAtom, basis: LumaChromaBasis = CANONICAL):
        extract_carriers(atom, basis)
        self.entries[name] = LibraryEntry(atom, basis)

    def load(self, path, name: str | None = None) -> str:
        entry = load_atom_file(path)
        key = name or Path(path).stem
        self.register(key, entry.atom, entry.basis)
        return key

    def get(self, name: str) -> LibraryEntry:
        try:
            return self.entries[name]
        except KeyError:
            raise ValueError(f"unknown atom {name!r}; known: {', '.join(sorted(self.entries))}") from None

    def resolve(self, spec) -> LibraryEntry:
        """Library name or path to an atom JSON file."""
        if spec in self.entries:
            return self.entries[spec]
        p = Path(spec)
        if p.exists():
            return load_atom_file(p)
        raise ValueError(f"{spec!r} is neither a library atom nor a file")

    def names(self):
        return sorted(self.entries)
