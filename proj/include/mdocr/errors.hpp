#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdocr {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: config_error -> 1, data errors -> 2, render_error -> 3.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad flag values, malformed command templates,
// out-of-range parameters.
class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

// Invalid input data (manifests, corpora, metric preconditions).
class data_error : public error {
public:
    explicit data_error(const std::string& msg) : error(msg) {}
};

// Input is not valid UTF-8.
class encoding_error : public data_error {
public:
    encoding_error(const std::string& msg, std::size_t byte_offset)
        : data_error(msg + " at byte " + std::to_string(byte_offset)),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Structured text that does not parse (HTML fragments). Carries the byte
// offset of the offending construct.
class parse_error : public data_error {
public:
    parse_error(const std::string& msg, std::size_t byte_offset)
        : data_error(msg + " at byte " + std::to_string(byte_offset)),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Malformed on-disk artifact (vocab.json, merges.txt, manifest, report).
// line == 0 means "no line information".
class format_error : public data_error {
public:
    format_error(const std::string& msg, std::size_t line = 0)
        : data_error(line ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A metric is undefined for the given inputs (e.g. empty reference).
class metric_error : public data_error {
public:
    explicit metric_error(const std::string& msg) : data_error(msg) {}
};

// Filesystem failure while producing outputs.
class io_error : public data_error {
public:
    explicit io_error(const std::string& msg) : data_error(msg) {}
};

// External renderer command failed. Carries the child exit code (-1 when
// the process could not be started at all).
class render_error : public error {
public:
    render_error(const std::string& msg, int exit_code)
        : error(msg + " (exit code " + std::to_string(exit_code) + ")"),
          exit_code_(exit_code) {}

    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

}  // namespace mdocr
