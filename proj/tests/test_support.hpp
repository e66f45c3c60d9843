#pragma once

#include <filesystem>

#include "rydsense/pairstate.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return RYDSENSE_DATA_DIR; }

inline const rydsense::StarkTable& fixture_table() {
  static const auto table = rydsense::load_stark_table(data_dir() / "stark_rb87_59D32_bz0.csv");
  return table;
}

}  // namespace testing_support
