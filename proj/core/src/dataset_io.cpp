// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nakul/csv.hpp"
#include "nakul/errors.hpp"

namespace nakul {

namespace fs = std::filesystem;

std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

double parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

void write_signal(std::ostream& out, const Tensor& signal, double rate, int label) {
  if (signal.rank() != 2) throw ShapeError("signal must be [C, T]");
  const std::size_t C = signal.dim(0), T = signal.dim(1);
  out << "# channels=" << C << " samples=" << T << " rate=" << format_number(rate) << " label=" << label << '\n';
  std::string line;
  for (std::size_t c = 0; c < C; ++c) {
    line.clear();
    for (std::size_t t = 0; t < T; ++t) {
      if (t) line += ',';
      line += format_number(signal[c * T + t]);
    }
    line += '\n';
    out << line;
  }
}

namespace {

std::string header_field(const std::string& header, const std::string& key) {
  std::istringstream in(header);
  std::string tok;
  while (in >> tok) {
    if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
  }
  throw LoadError("signal header lacks " + key + "=");
}

std::size_t parse_count(const std::string& s, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) throw LoadError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

int parse_label(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) throw LoadError("bad label '" + s + "'");
  return v;
}

}  // namespace

SignalFile read_signal(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#", 0) != 0) throw LoadError("signal file lacks a '#' header");
  const std::size_t C = parse_count(header_field(header, "channels"), "channel count");
  const std::size_t T = parse_count(header_field(header, "samples"), "sample count");
  SignalFile f;
  try {
    f.rate = parse_number(header_field(header, "rate"));
  } catch (const std::invalid_argument& e) {
    throw LoadError(std::string("bad rate: ") + e.what());
  }
  if (!(f.rate > 0.0)) throw LoadError("rate must be positive");
  f.label = parse_label(header_field(header, "label"));
  std::vector<double> data;
  data.reserve(C * T);
  std::string line;
  for (std::size_t c = 0; c < C; ++c) {
    if (!std::getline(in, line)) throw LoadError("signal file has fewer than " + std::to_string(C) + " channel lines");
    std::size_t count = 0, pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      try {
        data.push_back(parse_number(std::string_view(line).substr(pos, comma - pos)));
      } catch (const std::invalid_argument& e) {
        throw LoadError("channel " + std::to_string(c) + ": " + e.what());
      }
      ++count;
      pos = comma + 1;
    }
    if (count != T) {
      throw LoadError("channel " + std::to_string(c) + " has " + std::to_string(count) + " samples, expected " +
                      std::to_string(T));
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw LoadError("signal file has extra lines");
  }
  f.signal = Tensor({C, T}, std::move(data));
  return f;
}

void write_dataset(const std::string& dir, const Dataset& data, const std::string& manifest) {
  fs::create_directories(dir);
  std::ofstream labels(fs::path(dir) / "labels.csv", std::ios::trunc);
  if (!labels) throw std::runtime_error("cannot write " + (fs::path(dir) / "labels.csv").string());
  labels << "filename,label\n";
  for (const auto& s : data.samples) {
    std::ofstream out(fs::path(dir) / s.name, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / s.name).string());
    write_signal(out, s.signal, data.rate, s.label);
    labels << s.name << ',' << s.label << '\n';
  }
  std::ofstream m(fs::path(dir) / "manifest.txt", std::ios::trunc);
  m << manifest;
  if (!labels || !m) throw std::runtime_error("failed writing dataset to " + dir);
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream labels(fs::path(dir) / "labels.csv");
  if (!labels) throw LoadError("cannot open " + (fs::path(dir) / "labels.csv").string());
  std::string line;
  if (!std::getline(labels, line) || line.rfind("filename,label", 0) != 0) {
    throw LoadError("labels.csv must start with the header filename,label");
  }
  Dataset d;
  while (std::getline(labels, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw LoadError("labels.csv line without a comma: " + line);
    const std::string name = line.substr(0, comma);
    const int label = parse_label(line.substr(comma + 1));
    std::ifstream in(fs::path(dir) / name);
    if (!in) throw LoadError("cannot open trial " + name);
    SignalFile f;
    try {
      f = read_signal(in);
    } catch (const LoadError& e) {
      throw LoadError(name + ": " + e.what());
    }
    if (f.label != label) throw LoadError(name + ": header label disagrees with labels.csv");
    if (d.samples.empty()) {
      d.channels = f.signal.dim(0);
      d.length = f.signal.dim(1);
      d.rate = f.rate;
    } else if (f.signal.dim(0) != d.channels || f.signal.dim(1) != d.length || f.rate != d.rate) {
      throw LoadError(name + ": shape or rate differs from the first trial");
    }
    d.classes = std::max<std::size_t>(d.classes, std::size_t(label) + 1);
    d.samples.push_back({name, std::move(f.signal), label});
  }
  if (d.samples.empty()) throw LoadError("dataset " + dir + " lists no trials");
  return d;
}

}  // namespace nakul
