"""The one module that actually talks to Ghidra.

Imports of `ghidra.*` happen lazily inside the constructor, so everything
else in this package imports (and tests) fine outside a Ghidra process.
Runs under PyGhidra (Ghidra 11+); one backend wraps one open program, and a
batch gets its parallelism from running several headless processes, one
binary each — the decompiler interface is not thread-safe.
"""

from __future__ import annotations

from .exporter import DecompResult, FunctionInfo, VariableInfo


class GhidraBackend:
    def __init__(self, program, monitor=None):
        from ghidra.app.decompiler import DecompInterface, DecompileOptions
        from ghidra.util.task import ConsoleTaskMonitor

        self.program = program
        self.monitor = monitor if monitor is not None else ConsoleTaskMonitor()
        self._ifc = DecompInterface()
        self._ifc.setOptions(DecompileOptions())
        self._ifc.openProgram(program)

    def close(self):
        self._ifc.dispose()

    def functions(self):
        for fn in self.program.getFunctionManager().getFunctions(True):
            if fn.isThunk() or fn.isExternal():
                continue
            yield FunctionInfo(
                name=str(fn.getName()),
                entry=int(fn.getEntryPoint().getOffset()),
                handle=fn,
            )

    def decompile(self, fn: FunctionInfo, timeout_seconds: int) -> DecompResult:
        res = self._ifc.decompileFunction(fn.handle, timeout_seconds, self.monitor)
        if not res.decompileCompleted():
            message = str(res.getErrorMessage() or "").lower()
            status = "timeout" if "time" in message else "failed"
            return DecompResult(status=status)
        high = res.getHighFunction()
        if high is None:
            return DecompResult(status="failed")

        variables = []
        it = high.getLocalSymbolMap().getSymbols()
        while it.hasNext():
            sym = it.next()
            storage = sym.getStorage()
            mapped = self._storage(storage)
            if mapped is None:
                continue  # unassigned/compound storage carries no location
            kind, value = mapped
            variables.append(
                VariableInfo(
                    name=str(sym.getName()),
                    storage_kind=kind,
                    storage_value=value,
                    storage_size=max(int(storage.size()), 1),
                    dtype=sym.getDataType(),
                )
            )

        names = {v.name for v in variables}
        return DecompResult(
            status="ok",
            code=str(res.getDecompiledFunction().getC()),
            variables=variables,
            tokens=self._tokens(res.getCCodeMarkup(), names),
        )

    @staticmethod
    def _storage(storage):
        if storage.isStackStorage():
            return "stack", int(storage.getStackOffset())
        if storage.isRegisterStorage():
            return "register", int(storage.getRegister().getOffset())
        if storage.isUniqueStorage():
            return "unique", int(storage.getFirstVarnode().getOffset())
        if storage.isMemoryStorage():
            return "ram", int(storage.getMinAddress().getOffset())
        return None

    @staticmethod
    def _tokens(markup, names):
        if markup is None:
            return None
        out = []

        def walk(node):
            n = node.numChildren()
            if n == 0:
                text = str(node.toString())
                var = None
                get_high = getattr(node, "getHighVariable", None)
                if get_high is not None:
                    high = get_high()
                    if high is not None and str(high.getName()) in names:
                        var = str(high.getName())
                out.append((text, var))
                return
            for i in range(n):
                walk(node.Child(i))

        walk(markup)
        return out


__all__ = ["GhidraBackend"]
