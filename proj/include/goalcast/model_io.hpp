#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "goalcast/belief_network.hpp"
#include "goalcast/temporal_inference.hpp"

namespace goalcast {

/// A network file: the network plus decay annotations on observation nodes.
struct ModelDocument {
  bn::Network network;
  std::vector<TemporalObservationSpec> temporal;

  bool operator==(const ModelDocument&) const = default;
};

/// Parses the block format described in docs/network-format.md. Structure
/// errors throw ModelFormatError; the network itself is not validated here.
ModelDocument parse_model(std::istream& in);
ModelDocument parse_model(const std::string& text);
/// Throws IoError when the file cannot be opened.
ModelDocument read_model(const std::filesystem::path& path);

/// Inverse of parse_model: parse_model(print_model(d)) == d.
std::string print_model(const ModelDocument& doc);

}  // namespace goalcast
