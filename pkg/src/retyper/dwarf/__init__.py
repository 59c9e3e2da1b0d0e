from .index import DwarfIndex, DwarfVariable, FunctionEntry, index_binary

__all__ = ["DwarfIndex", "DwarfVariable", "FunctionEntry", "index_binary"]
