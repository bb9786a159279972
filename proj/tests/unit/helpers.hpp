#pragma once

#include <doctest.h>

#include <memory>

#include "../support/oracle.hpp"
#include "memhub/error.hpp"
#include "memhub/store.hpp"

namespace testing {

inline memhub::StoreConfig config_for(const oracle::TempDir& dir) {
  memhub::StoreConfig cfg;
  cfg.data_dir = dir.path();
  cfg.sync_mode = memhub::SyncMode::kPerBatch;
  return cfg;
}

inline std::unique_ptr<memhub::Store> open_store(const oracle::TempDir& dir,
                                                 memhub::ManualClock* clock = nullptr) {
  memhub::StoreOptions opts;
  if (clock) opts.clock = clock->as_clock();
  return std::make_unique<memhub::Store>(config_for(dir), opts);
}

template <typename F>
memhub::ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const memhub::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return memhub::ErrorCode::kInternal;
}

}  // namespace testing
