#include "gridsched/matcher.hpp"

#include <algorithm>
#include <cctype>

namespace gridsched {

namespace {

std::string normalize(const std::string& s) {
    size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    std::string out = s.substr(begin, end - begin);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_all(const std::set<std::string>& required, const std::set<std::string>& available) {
    std::set<std::string> have;
    for (const auto& s : available) have.insert(normalize(s));
    return std::all_of(required.begin(), required.end(),
                       [&](const std::string& r) { return have.count(normalize(r)) > 0; });
}

}  // namespace

bool matches(const NonVolatileRequirements& req, const NonVolatileFacts& facts) {
    if (req.os && normalize(*req.os) != normalize(facts.os)) return false;
    if (req.arch && normalize(*req.arch) != normalize(facts.arch)) return false;
    if (req.min_memory_mb > facts.memory_mb) return false;
    if (!contains_all(req.required_libraries, facts.libraries)) return false;
    if (!contains_all(req.required_hardware, facts.hardware_features)) return false;
    return true;
}

std::vector<ComputerProfile> prune(const NonVolatileRequirements& req,
                                   const std::vector<ComputerProfile>& profiles) {
    std::vector<ComputerProfile> out;
    for (const auto& p : profiles)
        if (matches(req, p.nonvolatile)) out.push_back(p);
    return out;
}

}  // namespace gridsched
