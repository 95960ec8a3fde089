#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace rae {

struct Generation {
    std::string text;
    // Tokens as reported by the backend; concatenating them reproduces `text`
    // for remote backends, joining with spaces does for the mock.
    std::vector<std::string> tokens;
    bool whitespace_tokens = true;
};

// Greedy (temperature 0) text generation for the model being edited.
class Generator {
public:
    virtual ~Generator() = default;
    virtual Generation generate(std::string_view prompt, int max_new_tokens) const = 0;
    virtual std::string describe() const = 0;
};

// Returns a configured completion for prompts that match exactly after
// whitespace collapsing, truncated to max_new_tokens whitespace tokens.
// Unmatched prompts produce `fallback`.
class MockGenerator final : public Generator {
public:
    explicit MockGenerator(std::map<std::string, std::string> completions, std::string fallback = {});

    Generation generate(std::string_view prompt, int max_new_tokens) const override;
    std::string describe() const override { return "mock"; }

private:
    std::map<std::string, std::string> completions_;
    std::string fallback_;
};

// Line-delimited {"prompt": ..., "completion": ...} records; an optional
// {"fallback": ...} record sets the unmatched completion.
std::shared_ptr<const MockGenerator> load_mock_generator(const std::filesystem::path& path);

}  // namespace rae
