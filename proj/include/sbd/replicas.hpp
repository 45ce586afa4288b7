#ifndef SBD_REPLICAS_HPP
#define SBD_REPLICAS_HPP

#include <exception>
#include <stdexcept>

#include <omp.h>

namespace sbd {

// Runs fn(replica_index) for replica indices 0..replicas-1.  jobs <= 1 is
// a plain serial loop (the reference path); otherwise OpenMP worker
// threads share the replicas dynamically.  Replicas must be independent:
// each writes only to its own output slot, so serial and parallel runs
// produce identical results.  The first exception thrown by any replica
// is rethrown after the loop drains.
template <class Fn>
void for_each_replica(long replicas, int jobs, Fn&& fn) {
    if (replicas < 0)
        throw std::invalid_argument("for_each_replica: negative replica count");
    if (jobs <= 1) {
        for (long r = 0; r < replicas; ++r)
            fn(r);
        return;
    }
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (long r = 0; r < replicas; ++r) {
        try {
            fn(r);
        } catch (...) {
#pragma omp critical(sbd_replica_error)
            if (!first_error)
                first_error = std::current_exception();
        }
    }
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace sbd

#endif
