#include "gridrl/common.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gridrl {

double parse_double(std::string_view s, int line) {
    s = trim(s);
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || tmp.empty() || errno == ERANGE)
        throw ParseError("expected a number, got '" + tmp + "'", line);
    return v;
}

long long parse_int(std::string_view s, int line) {
    s = trim(s);
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(tmp.c_str(), &end, 10);
    if (end != tmp.c_str() + tmp.size() || tmp.empty() || errno == ERANGE)
        throw ParseError("expected an integer, got '" + tmp + "'", line);
    return v;
}

bool parse_bool(std::string_view s, int line) {
    s = trim(s);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ParseError("expected true/false, got '" + std::string(s) + "'", line);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gridrl
