"""Self-describing structured data files.

Values are described by a type tree (numbers, strings, structs, unions,
arrays, late-bound ``any``) embedded in every file; the same data can live in
an in-memory tree, a text file, a sequential binary file read lazily, or a
block-structured random-access store.
"""

from ._structfile import (
    BlockStore,
    Data,
    LazyFile,
    StructFileError,
    TypeEnv,
    create_store,
    data_to_type,
    new_data,
    open_binary,
    open_store,
    parse_type_text,
    read_text_data,
    type_to_data,
    write_binary_file,
    write_text_file,
)

__all__ = [
    "BlockStore",
    "Data",
    "LazyFile",
    "StructFileError",
    "TypeEnv",
    "create_store",
    "data_to_type",
    "new_data",
    "open_binary",
    "open_store",
    "parse_type_text",
    "read_text_data",
    "type_to_data",
    "write_binary_file",
    "write_text_file",
]
