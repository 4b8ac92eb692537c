#pragma once

namespace roughkit {

// Honors ROUGHKIT_THREADS when set; returns the worker count in use.
int configure_threads();
int thread_count();

}  // namespace roughkit
