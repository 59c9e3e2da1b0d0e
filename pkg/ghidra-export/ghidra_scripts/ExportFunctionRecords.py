# Export every function of the current program as interchange records.
# Runs as a headless post-analysis script under PyGhidra:
#
#   analyzeHeadless <proj-dir> <proj> -import <binary> \
#       -postScript ExportFunctionRecords.py <out.jsonl> <view> [unstripped] \
#       -scriptPath <this package's ghidra_scripts dir> -deleteProject
#
# Args: output path; view (debug|stripped); for the stripped view, the path
# of the UNSTRIPPED original — records of both views carry its hash so they
# join downstream. Rerunning appends only functions missing from the output.
# @category Export

from ghidra_export.exporter import DEFAULT_TIMEOUT_SECONDS, export_binary
from ghidra_export.ghidra_backend import GhidraBackend
from ghidra_export.interchange import binary_error_record, sha256_of
from ghidra_export.resume import ResumableWriter


def run():
    args = list(getScriptArgs())  # noqa: F821 - injected by Ghidra
    if len(args) < 2 or args[1] not in ("debug", "stripped"):
        print("usage: ExportFunctionRecords.py <out.jsonl> <view> [unstripped]")
        return 1
    out_path, view = args[0], args[1]
    if view == "stripped":
        if len(args) < 3:
            print("stripped view needs the unstripped binary's path (arg 3)")
            return 1
        hashed = args[2]
    else:
        hashed = currentProgram.getExecutablePath()  # noqa: F821
    binary_id = sha256_of(hashed)

    program = currentProgram  # noqa: F821
    with ResumableWriter(out_path) as writer:
        try:
            backend = GhidraBackend(program, monitor)  # noqa: F821
        except Exception as exc:
            print("backend setup failed: %s" % exc)
            writer.write(binary_error_record(binary_id, view))
            return 1
        try:
            for record in export_binary(
                backend,
                binary_id,
                view,
                timeout_seconds=DEFAULT_TIMEOUT_SECONDS,
                resume=writer,
            ):
                writer.write(record)
        finally:
            backend.close()
    print(
        "%s: wrote %d record(s), skipped %d already exported"
        % (out_path, writer.written, writer.skipped)
    )
    return 0


if run() != 0:
    raise RuntimeError("export failed; see the log above")
