#include "fairvfl/models/config.hpp"

#include "fairvfl/error.hpp"

namespace fairvfl::models {

void RepWidths::validate() const {
  if (unified < 1) throw Error(ErrorKind::Config, "unified width must be >= 1");
  for (auto h : protected_widths) {
    if (h < 1) throw Error(ErrorKind::Config, "protected widths must be >= 1");
  }
}

nlohmann::json RepWidths::to_json() const { return {{"unified", unified}, {"protected", protected_widths}}; }

RepWidths RepWidths::from_json(const nlohmann::json& j) {
  RepWidths w;
  w.unified = j.value("unified", w.unified);
  w.protected_widths = j.value("protected", w.protected_widths);
  return w;
}

void ArchConfig::validate(const RepWidths& widths) const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "architecture: " + m); };
  if (embedding_width < 1 || encoder_hidden < 1 || pooling_hidden < 1 || head_hidden < 1 || mapper_hidden < 1 ||
      contrastive_hidden < 1 || bias_hidden < 1) {
    fail("all widths must be >= 1");
  }
  if (attention_heads < 1 || widths.unified % attention_heads != 0) {
    fail("unified width " + std::to_string(widths.unified) + " is not divisible by " +
         std::to_string(attention_heads) + " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
}

nlohmann::json ArchConfig::to_json() const {
  return {{"embedding_width", embedding_width}, {"encoder_hidden", encoder_hidden},
          {"attention_heads", attention_heads}, {"pooling_hidden", pooling_hidden},
          {"head_hidden", head_hidden},         {"mapper_hidden", mapper_hidden},
          {"contrastive_hidden", contrastive_hidden}, {"bias_hidden", bias_hidden},
          {"dropout", dropout}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.embedding_width = j.value("embedding_width", a.embedding_width);
  a.encoder_hidden = j.value("encoder_hidden", a.encoder_hidden);
  a.attention_heads = j.value("attention_heads", a.attention_heads);
  a.pooling_hidden = j.value("pooling_hidden", a.pooling_hidden);
  a.head_hidden = j.value("head_hidden", a.head_hidden);
  a.mapper_hidden = j.value("mapper_hidden", a.mapper_hidden);
  a.contrastive_hidden = j.value("contrastive_hidden", a.contrastive_hidden);
  a.bias_hidden = j.value("bias_hidden", a.bias_hidden);
  a.dropout = j.value("dropout", a.dropout);
  return a;
}

}  // namespace fairvfl::models
