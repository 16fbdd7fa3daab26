#include "cmatch/textprep.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace cmatch;

TEST_CASE("tokenize normalises tweets") {
    CHECK(tokenize("Fire near @john http://x.co #help") ==
          Tokens{"fire", "near", "<user>", "<url>", "help"});
    CHECK(tokenize("   ") == Tokens{"<empty>"});
    CHECK(tokenize("") == Tokens{"<empty>"});
    CHECK(tokenize("Help! HELP!") == Tokens{"help", "help"});
    CHECK(tokenize("see https://t.co/abc now") == Tokens{"see", "<url>", "now"});
}

TEST_CASE("vocabulary assigns ids by first appearance") {
    const std::vector<Tokens> corpus{{"b", "a"}, {"a", "c"}};
    const Vocabulary vocab = Vocabulary::build(corpus);
    CHECK(vocab.size() == 5);
    CHECK(vocab.id("b") == 2);
    CHECK(vocab.id("a") == 3);
    CHECK(vocab.id("c") == 4);
    CHECK(vocab.id("zzz") == Vocabulary::kUnknown);

    std::stringstream buffer;
    vocab.save(buffer);
    const Vocabulary loaded = Vocabulary::load(buffer);
    CHECK(std::ranges::equal(loaded.tokens(), vocab.tokens()));
}

TEST_CASE("encode pads, truncates and maps unknowns") {
    const std::vector<Tokens> corpus{{"fire", "help"}};
    const Vocabulary vocab = Vocabulary::build(corpus);

    const EncodedText short_text = encode(Tokens{"fire", "help"}, vocab, 64);
    CHECK(short_text.length == 2);
    CHECK(short_text.ids.size() == 64);
    CHECK(short_text.ids[0] == vocab.id("fire"));
    CHECK(std::all_of(short_text.ids.begin() + 2, short_text.ids.end(),
                      [](std::int32_t id) { return id == Vocabulary::kPadding; }));

    const Tokens long_tokens(70, "help");
    const EncodedText long_text = encode(long_tokens, vocab, 64);
    CHECK(long_text.length == 64);
    CHECK(long_text.ids.size() == 64);

    const EncodedText unknown = encode(Tokens{"x", "y", "z"}, vocab, 8);
    CHECK(unknown.length == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(unknown.ids[i] == Vocabulary::kUnknown);
}

TEST_CASE("lexicon parsing and lookup") {
    std::istringstream in("# comment\n\nfire\tblaze,flames\nFlood\tdeluge\n");
    const SynonymLexicon lexicon = SynonymLexicon::parse(in);
    CHECK(lexicon.size() == 2);
    REQUIRE(lexicon.lookup("FIRE") != nullptr);
    CHECK(*lexicon.lookup("fire") == std::vector<std::string>{"blaze", "flames"});
    CHECK(lexicon.lookup("flood") != nullptr);
    CHECK(lexicon.lookup("storm") == nullptr);
}

TEST_CASE("bundled lexicon loads") {
    const SynonymLexicon lexicon = SynonymLexicon::load(bundled_lexicon_path());
    CHECK(lexicon.size() > 50);
    CHECK(lexicon.lookup("fire") != nullptr);
}

namespace {

std::size_t differing(const Tokens& a, const Tokens& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
    return n;
}

} // namespace

TEST_CASE("edit count rounds half up with a floor of one") {
    CHECK(edit_count(25) == 3);
    CHECK(edit_count(10) == 1);
    CHECK(edit_count(4) == 1);
    CHECK(edit_count(15) == 2);
    CHECK(edit_count(0) == 1);
}

TEST_CASE("synonym replacement touches the expected number of tokens") {
    SynonymLexicon lexicon;
    lexicon.add("w", {"v1", "v2"});

    const Tokens all_hits(25, "w");
    for (std::uint64_t k = 0; k < 20; ++k) {
        AugmenterRng rng(1, 2, k);
        CHECK(differing(all_hits, synonym_replace(all_hits, lexicon, rng)) == 3);
    }

    Tokens one_hit(10, "x");
    one_hit[6] = "w";
    AugmenterRng rng(3, 4, 0);
    const Tokens replaced = synonym_replace(one_hit, lexicon, rng);
    CHECK(differing(one_hit, replaced) == 1);
    CHECK((replaced[6] == "v1" || replaced[6] == "v2"));

    AugmenterRng rng2(3, 4, 1);
    CHECK(synonym_replace(one_hit, SynonymLexicon{}, rng2) == one_hit);
}

TEST_CASE("random swap preserves the multiset") {
    AugmenterRng rng(5, 6, 0);
    CHECK(random_swap(Tokens{"a"}, rng) == Tokens{"a"});
    CHECK(random_swap(Tokens{"a", "b"}, rng) == Tokens{"b", "a"});

    const Tokens text{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"};
    for (std::uint64_t k = 0; k < 50; ++k) {
        AugmenterRng r(7, 8, k);
        Tokens out = random_swap(text, r);
        std::ranges::sort(out);
        CHECK(out == text);
    }
}

TEST_CASE("augment is deterministic per stream and uses both kinds") {
    const SynonymLexicon lexicon = SynonymLexicon::load(bundled_lexicon_path());
    const Tokens text = tokenize("the fire destroyed many houses and people need help now");
    std::set<int> kinds;
    for (std::uint64_t k = 0; k < 40; ++k) {
        AugmenterRng a(11, 12, k);
        AugmenterRng b(11, 12, k);
        CHECK(augment(text, lexicon, a) == augment(text, lexicon, b));
        AugmenterRng c(11, 12, k);
        kinds.insert(static_cast<int>(choose_augmentation(c)));
    }
    CHECK(kinds.size() == 2);

    AugmenterRng x(11, 12, 0);
    AugmenterRng y(11, 13, 0);
    CHECK(x.engine()() != y.engine()());
}

TEST_CASE("mix_seed separates nearby inputs") {
    CHECK(mix_seed(1) != mix_seed(2));
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    CHECK(mix_seed(1, 2, 3) == mix_seed(1, 2, 3));
}
