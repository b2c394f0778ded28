#pragma once

#include <fstream>
#include <nlohmann/json.hpp>

#ifndef MINTO_ORACLE_FILE
#error "MINTO_ORACLE_FILE must point at tests/oracles/oracles.json"
#endif

inline const nlohmann::json& oracles() {
  static const nlohmann::json doc = [] {
    std::ifstream in(MINTO_ORACLE_FILE);
    return nlohmann::json::parse(in);
  }();
  return doc;
}
