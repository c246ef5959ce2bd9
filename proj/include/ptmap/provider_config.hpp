#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace ptmap {

enum class ProviderKind { mock, http };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::string model_id = "mock";
    std::string endpoint;             // http only
    int timeout_ms = 30000;
    int max_retries = 2;
    int backoff_ms = 200;             // first retry delay; doubles per attempt
    std::uint64_t seed = 0;           // mock only
    std::size_t dimension = 256;      // mock embedder only
    std::string lexicon;              // mock interpreter lexicon path
    std::string token_env;            // env var holding the bearer token
    std::size_t batch_size = 1;       // classification pairs per request
    std::map<std::string, std::string> prompts;
};

}  // namespace ptmap
