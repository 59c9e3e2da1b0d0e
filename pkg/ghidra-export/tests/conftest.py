"""Plain-Python stand-ins for the decompiler side of the backend seam.

The fake data types carry the same Java interface names the real Ghidra
classes expose in their hierarchy (Pointer, Structure, TypeDef, ...), which
is exactly what typemap dispatches on, and they implement only the accessor
methods the mappers call. FakeBackend scripts a whole binary's worth of
decompilation outcomes, including a function that blows the time budget and
one whose decompilation throws.
"""

from __future__ import annotations

import pytest

from ghidra_export.exporter import DecompResult, FunctionInfo, VariableInfo


# -- fake Ghidra data types --------------------------------------------------


class DataType:
    def __init__(self, name, length):
        self._name = name
        self._length = length

    def getName(self):
        return self._name

    def getLength(self):
        return self._length

    def getPathName(self):
        return "/" + (self._name or "anon")


class AbstractIntegerDataType(DataType):
    pass


class AbstractFloatDataType(DataType):
    pass


class BooleanDataType(DataType):
    def __init__(self):
        DataType.__init__(self, "bool", 1)


class Undefined(DataType):
    pass


class DefaultDataType(DataType):
    def __init__(self):
        DataType.__init__(self, "undefined", 1)


class VoidDataType(DataType):
    def __init__(self):
        DataType.__init__(self, "void", 0)


class TypeDef(DataType):
    def __init__(self, name, base):
        DataType.__init__(self, name, base.getLength())
        self._base = base

    def getBaseDataType(self):
        return self._base


class Pointer(DataType):
    def __init__(self, target, length=8):
        name = (target.getName() if target else "void") + " *"
        DataType.__init__(self, name, length)
        self._target = target

    def getDataType(self):
        return self._target


class Array(DataType):
    def __init__(self, element, count):
        DataType.__init__(
            self, f"{element.getName()}[{count}]", element.getLength() * count
        )
        self._element = element
        self._count = count

    def getDataType(self):
        return self._element

    def getNumElements(self):
        return self._count


class DataTypeComponent:
    def __init__(self, field_name, dtype, offset):
        self._field_name = field_name
        self._dtype = dtype
        self._offset = offset

    def getFieldName(self):
        return self._field_name

    def getDataType(self):
        return self._dtype

    def getOffset(self):
        return self._offset

    def getLength(self):
        return self._dtype.getLength()


class Structure(DataType):
    def __init__(self, name, length, components=()):
        DataType.__init__(self, name, length)
        self._components = list(components)

    def getDefinedComponents(self):
        return list(self._components)

    def isNotYetDefined(self):
        return not self._components

    def add(self, component):
        self._components.append(component)


class Union(DataType):
    def __init__(self, name, length, components=()):
        DataType.__init__(self, name, length)
        self._components = list(components)

    def getComponents(self):
        return list(self._components)

    def isNotYetDefined(self):
        return not self._components


class Enum(DataType):
    pass


class ParameterDefinition:
    def __init__(self, dtype):
        self._dtype = dtype

    def getDataType(self):
        return self._dtype


class FunctionDefinition(DataType):
    def __init__(self, name, ret, args):
        DataType.__init__(self, name, 0)
        self._ret = ret
        self._args = [ParameterDefinition(a) for a in args]

    def getReturnType(self):
        return self._ret

    def getArguments(self):
        return list(self._args)


INT = AbstractIntegerDataType("int", 4)
UINT = AbstractIntegerDataType("uint", 4)
CHAR = AbstractIntegerDataType("char", 1)
ULONG = AbstractIntegerDataType("ulong", 8)
FLOAT = AbstractFloatDataType("float", 4)


# -- fake decompiler backend -------------------------------------------------


class FakeFunction:
    def __init__(self, name, entry, result=None, cost_seconds=0, raises=False):
        self.info = FunctionInfo(name=name, entry=entry, handle=name)
        self.result = result
        self.cost_seconds = cost_seconds
        self.raises = raises


class FakeBackend:
    def __init__(self, fns):
        self.fns = list(fns)
        self.decompile_calls = 0

    def functions(self):
        for fn in self.fns:
            yield fn.info

    def decompile(self, info, timeout_seconds):
        self.decompile_calls += 1
        fn = next(f for f in self.fns if f.info.entry == info.entry)
        if fn.raises:
            raise RuntimeError("decompiler crashed on this function")
        if fn.cost_seconds > timeout_seconds:
            return DecompResult(status="timeout")
        return fn.result


def _ok_result(code, variables, tokens=None):
    return DecompResult(status="ok", code=code, variables=variables, tokens=tokens)


@pytest.fixture
def fake_backend():
    main_vars = [
        VariableInfo("iVar1", "register", 0, 4, INT),
        VariableInfo("local_18", "stack", -24, 8, Pointer(CHAR)),
        VariableInfo("uStack_c", "stack", -12, 4, UINT),
    ]
    tokens = [
        ("int", None),
        (" ", None),
        ("iVar1", "iVar1"),
        (";", None),
        ("\n", None),
        ("*", None),
        ("local_18", "local_18"),
    ]
    return FakeBackend(
        [
            FakeFunction(
                "FUN_00101000",
                0x101000,
                _ok_result("int FUN_00101000(void)\n{\n}\n", main_vars, tokens),
            ),
            FakeFunction(
                "FUN_00101200", 0x101200, _ok_result("void FUN_00101200(void)\n", [])
            ),
            FakeFunction(
                "FUN_00101400",
                0x101400,
                _ok_result("void FUN_00101400(void)\n{\n}\n", []),
                cost_seconds=1_000_000,
            ),
            FakeFunction("FUN_00101600", 0x101600, raises=True),
        ]
    )


BINARY_ID = "ab" * 32
