#pragma once

namespace paydiff {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// kernel after every network call. Inference allocates and frees the same
/// large blocks repeatedly; without this each call pays fresh page faults.
/// No-op outside glibc.
void tune_allocator();

}  // namespace paydiff
