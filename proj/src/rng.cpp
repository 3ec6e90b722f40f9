#include "lanepe/rng.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace lanepe {

std::string SeededRng::serialize() const {
  std::ostringstream out;
  out << gen_ << ' ' << (has_spare_ ? 1 : 0);
  if (has_spare_) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", spare_);  // hexfloat, exact
    out << ' ' << buf;
  }
  return out.str();
}

void SeededRng::restore(const std::string& text) {
  std::istringstream in(text);
  int spare_flag = 0;
  in >> gen_ >> spare_flag;
  if (!in) throw std::runtime_error("SeededRng: corrupt serialized state");
  has_spare_ = spare_flag != 0;
  spare_ = 0.0;
  if (has_spare_) {
    std::string tok;
    in >> tok;
    if (tok.empty()) throw std::runtime_error("SeededRng: missing spare");
    spare_ = std::strtod(tok.c_str(), nullptr);
  }
}

}  // namespace lanepe
