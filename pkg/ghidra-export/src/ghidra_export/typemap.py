"""Map decompiler data types onto interchange type objects.

The whole mapping lives in this one file as an ordered dispatch table, so
"what does kind X become" has exactly one answer and the tests can enumerate
it. Classification is by Java interface name found anywhere in the object's
class hierarchy (``Pointer``, ``Structure``, ...), which works identically
for real Ghidra types under PyGhidra and for the plain-Python stand-ins the
tests use — no Ghidra import needed at module scope.

Decisions baked in here:

- Typedefs resolve to their base type; the consumer compares canonical
  types, so ``uint32_t`` and ``unsigned int`` must not export differently.
- Primitive names are the decompiler's own (``uint``, ``undefined4``). The
  consumer owns canonicalization; inventing a renaming here would just be a
  second, disagreeing canonicalizer.
- Recursive composites terminate as incomplete references: the second time
  a struct shows up on the same descent path it exports as tag-only.
- Anything unclassified exports as a primitive named after itself rather
  than failing the function: one weird type must not cost a whole record.
"""

from __future__ import annotations

ANON_TAG = "<anon>"


def _hierarchy(dt) -> frozenset:
    return frozenset(c.__name__ for c in type(dt).__mro__)


def _name(dt) -> str:
    name = dt.getName()
    return name if name else ANON_TAG


def _length(dt) -> int:
    # dynamically-sized types report -1; export 0 like any unknown size
    return max(int(dt.getLength()), 0)


def map_type(dt, _seen: frozenset = frozenset()) -> dict:
    """One decompiler data type -> interchange type object (a plain dict)."""
    if dt is None:
        return {"kind": "void"}
    classes = _hierarchy(dt)
    for marker, mapper in _DISPATCH:
        if marker in classes:
            return mapper(dt, _seen)
    return _map_opaque(dt, _seen)


def _map_typedef(dt, seen):
    return map_type(dt.getBaseDataType(), seen)


def _map_pointer(dt, seen):
    return {"kind": "pointer", "target": map_type(dt.getDataType(), seen)}


def _map_array(dt, seen):
    return {
        "kind": "array",
        "element": map_type(dt.getDataType(), seen),
        "count": int(dt.getNumElements()),
    }


def _composite_key(dt) -> str:
    # getPathName is unique within a program's type manager; fall back to
    # the display name for stand-ins that don't model paths
    get = getattr(dt, "getPathName", None)
    return str(get()) if get else _name(dt)


def _map_struct(dt, seen):
    tag = _name(dt)
    key = _composite_key(dt)
    if key in seen or _not_yet_defined(dt):
        return {
            "kind": "struct",
            "tag": tag,
            "size": _length(dt),
            "incomplete": True,
            "fields": [],
        }
    inner = seen | {key}
    return {
        "kind": "struct",
        "tag": tag,
        "size": _length(dt),
        "incomplete": False,
        "fields": [_field(c, inner) for c in dt.getDefinedComponents()],
    }


def _map_union(dt, seen):
    tag = _name(dt)
    key = _composite_key(dt)
    if key in seen or _not_yet_defined(dt):
        return {
            "kind": "union",
            "tag": tag,
            "size": _length(dt),
            "incomplete": True,
            "members": [],
        }
    inner = seen | {key}
    return {
        "kind": "union",
        "tag": tag,
        "size": _length(dt),
        "incomplete": False,
        "members": [_field(c, inner) for c in dt.getComponents()],
    }


def _not_yet_defined(dt) -> bool:
    get = getattr(dt, "isNotYetDefined", None)
    return bool(get()) if get else False


def _field(component, seen) -> dict:
    name = component.getFieldName()
    if not name:
        name = f"field_0x{int(component.getOffset()):x}"
    return {
        "name": name,
        "type": map_type(component.getDataType(), seen),
        "offset": int(component.getOffset()),
        "size": int(component.getLength()),
    }


def _map_enum(dt, seen):
    return {"kind": "enum", "tag": _name(dt), "size": _length(dt)}


def _map_function(dt, seen):
    return {
        "kind": "function",
        "return": map_type(dt.getReturnType(), seen),
        "params": [map_type(a.getDataType(), seen) for a in dt.getArguments()],
    }


def _map_void(dt, seen):
    return {"kind": "void"}


def _map_primitive(dt, seen):
    return {"kind": "primitive", "name": _name(dt), "size": _length(dt)}


def _map_opaque(dt, seen):
    # unclassified kinds (bitfields, custom databases): keep the name so the
    # record survives and the mismatch is visible in evaluation
    return {"kind": "primitive", "name": _name(dt), "size": _length(dt)}


# Ordered: TypeDef first (a typedef to a struct carries both interfaces),
# Pointer/Array before the composite markers their targets may also expose,
# concrete builtins before the broad primitive families.
_DISPATCH = (
    ("TypeDef", _map_typedef),
    ("Pointer", _map_pointer),
    ("Array", _map_array),
    ("Structure", _map_struct),
    ("Union", _map_union),
    ("Enum", _map_enum),
    ("FunctionDefinition", _map_function),
    ("VoidDataType", _map_void),
    ("AbstractIntegerDataType", _map_primitive),
    ("AbstractFloatDataType", _map_primitive),
    ("BooleanDataType", _map_primitive),
    ("Undefined", _map_primitive),
    ("DefaultDataType", _map_primitive),
)

DISPATCH_MARKERS = tuple(marker for marker, _ in _DISPATCH)

__all__ = ["map_type", "ANON_TAG", "DISPATCH_MARKERS"]
