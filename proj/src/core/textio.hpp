#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/frame.hpp"

namespace cansim {

// Frame text form: ID#HEXDATA, e.g. 1CF00400#DEADBEEF or 0F1#. The id
// is hex; more than three digits (or a value above 0x7FF) means an
// extended identifier. A trailing R marks a remote frame: 0F1#R.
Frame parse_frame_text(const std::string& text);
std::string format_frame_text(const Frame& f);

std::string format_id(uint32_t id, bool extended);

// Reads one hex id per line; '#' starts a comment, blank lines are
// skipped. Ids with more than three digits are extended.
std::vector<uint32_t> load_id_list(const std::string& path);

std::string to_lower(std::string s);
uint64_t parse_u64(const std::string& s);  // decimal or 0x-prefixed
double parse_f64(const std::string& s);

}  // namespace cansim
