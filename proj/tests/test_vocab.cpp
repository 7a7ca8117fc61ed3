#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "voila/vocab.hpp"

using namespace voila;
using namespace voila::vocab;

namespace {

VocabSpec sample_vocab() {
    return VocabSpec::build({"hello", "i", "am", "voila", "world"}, 16);
}

}  // namespace

TEST_CASE("layout: specials, then text with <unk> last, then level-major audio") {
    VocabSpec v = sample_vocab();
    CHECK(v.n_specials() == 12);
    CHECK(v.n_text() == 6);  // 5 words + <unk>
    CHECK(v.K() == 16);
    CHECK(v.Q() == 4);
    CHECK(v.total_size() == 12 + 6 + 4 * 16);
    CHECK(v.text_base() == 12);
    CHECK(v.unk_id() == 12 + 5);
    CHECK(v.audio_base(1) == 18);
    CHECK(v.audio_base(2) == 18 + 16);
    CHECK(v.audio_base(4) == 18 + 3 * 16);
    CHECK(v.audio_token_id(3, 7) == 18 + 2 * 16 + 7);
}

TEST_CASE("special token ids are fixed") {
    VocabSpec v = sample_vocab();
    CHECK(v.classify(kPad).word == "<pad>");
    CHECK(v.classify(kHuman).word == "<human>");
    CHECK(v.classify(kVoila).word == "<voila>");
    CHECK(v.classify(kEos).word == "<eos>");
    CHECK(v.classify(kAudioStep).word == "<audio_step>");
    CHECK(v.classify(kSilence).word == "<silence>");
    CHECK(v.classify(kTtsRefStart).word == "<TTS_REF_START>");
    CHECK(v.classify(kChatRefEnd).word == "<CHAT_REF_END>");
}

TEST_CASE("classify is the inverse of id construction for every id") {
    VocabSpec v = sample_vocab();
    for (int id = 0; id < v.total_size(); ++id) {
        Classified c = v.classify(id);
        switch (c.kind) {
            case TokenKind::Special:
                CHECK(c.special == id);
                break;
            case TokenKind::Text:
                CHECK(v.text_id(c.word) == id);
                break;
            case TokenKind::Audio:
                CHECK(v.audio_token_id(c.level, c.index) == id);
                break;
        }
    }
    CHECK_THROWS_AS(v.classify(-1), InputError);
    CHECK_THROWS_AS(v.classify(v.total_size()), InputError);
}

TEST_CASE("unknown and case-folded words") {
    VocabSpec v = sample_vocab();
    CHECK(v.text_id("Hello") == v.text_id("hello"));
    CHECK(v.text_id("HELLO") == v.text_id("hello"));
    CHECK(v.text_id("zebra") == v.unk_id());
    CHECK(v.in_lexicon("Voila"));
    CHECK_FALSE(v.in_lexicon("zebra"));
    CHECK_FALSE(v.in_lexicon("<unk>"));  // sentinel is not a word
}

TEST_CASE("tokenize/detokenize round trip") {
    VocabSpec v = sample_vocab();
    auto ids = v.tokenize_text("Hello world  I am\tVoila");
    CHECK(ids.size() == 5);
    CHECK(v.detokenize(ids) == "hello world i am voila");
    CHECK_THROWS_AS(v.detokenize({kEos}), InputError);
    CHECK_THROWS_AS(v.detokenize({v.audio_token_id(1, 0)}), InputError);
}

TEST_CASE("duplicate and empty words are rejected") {
    CHECK_THROWS_AS(VocabSpec::build({"a", "A"}, 8), ConfigError);
    CHECK_THROWS_AS(VocabSpec::build({"a", ""}, 8), ConfigError);
    CHECK_THROWS_AS(VocabSpec::build({"a", "<unk>"}, 8), ConfigError);
    CHECK_THROWS_AS(VocabSpec::build({"a"}, 1), ConfigError);
    CHECK_THROWS_AS(VocabSpec::build({"a"}, 8, 3), ConfigError);
}

TEST_CASE("manifest round trip preserves ids and hash") {
    VocabSpec v = sample_vocab();
    std::string m = v.manifest();
    VocabSpec v2 = VocabSpec::from_manifest(m);
    CHECK(v2.total_size() == v.total_size());
    CHECK(v2.manifest() == m);
    CHECK(v2.manifest_hash() == v.manifest_hash());
    for (int id = 0; id < v.total_size(); ++id) {
        Classified a = v.classify(id), b = v2.classify(id);
        CHECK(a.kind == b.kind);
        CHECK(a.word == b.word);
    }
    CHECK_THROWS_AS(VocabSpec::from_manifest("other-format 4 4\n"), InputError);
    // a different word list yields a different hash
    VocabSpec v3 = VocabSpec::build({"hello", "i", "am", "voila", "earth"}, 16);
    CHECK(v3.manifest_hash() != v.manifest_hash());
}

TEST_CASE("manifest header carries K and Q") {
    VocabSpec v = sample_vocab();
    CHECK(v.manifest().rfind("voila-vocab-v1 16 4\n", 0) == 0);
}
