#include <gtest/gtest.h>

#include <random>

#include "corpus.hpp"
#include "errors.hpp"
#include "preprocess.hpp"
#include "utf8.hpp"

namespace rscope {
namespace {

std::string text_of(const SentenceSpan& s) { return utf8::encode(s.text); }

TEST(Normalize, TitleNewlinesBecomeDotAndSpaces) {
  // Two newlines: one dot and one space.
  EXPECT_EQ(normalize_text(std::string_view("THE FACTS\n\nThe applicant was born.")),
            "THE FACTS. The applicant was born.");
  EXPECT_EQ(normalize_text(std::string_view("THE FACTS\n\n\nThe applicant")), "THE FACTS.  The applicant");
}

TEST(Normalize, IdentityWithoutNewlines) { EXPECT_EQ(normalize_text(std::string_view("abc")), "abc"); }

TEST(Normalize, AbbreviationDotMasked) {
  EXPECT_EQ(normalize_text(std::string_view("application no. 36619/03")), "application no_ 36619/03");
  EXPECT_EQ(normalize_text(std::string_view("Nos. 1 and 2")), "Nos_ 1 and 2");
  // Not word-bounded: left alone.
  EXPECT_EQ(normalize_text(std::string_view("casino. Then")), "casino. Then");
}

TEST(Normalize, PlainNewlinesBecomeSpaces) {
  EXPECT_EQ(normalize_text(std::string_view("the applicant\nwas born")), "the applicant was born");
}

TEST(Normalize, LengthPreservedOnRandomText) {
  std::mt19937_64 gen(11);
  const std::u32string alphabet = U"abcXYZ .\n\nno.NOS.éа*";
  for (int trial = 0; trial < 500; ++trial) {
    std::u32string t;
    const std::size_t n = gen() % 60;
    for (std::size_t i = 0; i < n; ++i) t.push_back(alphabet[gen() % alphabet.size()]);
    EXPECT_EQ(normalize_text(t).size(), t.size());
  }
}

TEST(SplitSentences, DateThenPlace) {
  const auto s = split_sentences(utf8::decode("It happened on 19/10/2004. Paolo was in Amsterdam."));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].span, (Span{0, 26}));
  // The second sentence is 23 code points long, so it ends at 50.
  EXPECT_EQ(s[1].span, (Span{27, 50}));
  EXPECT_EQ(text_of(s[1]), "Paolo was in Amsterdam.");
}

TEST(SplitSentences, Empty) { EXPECT_TRUE(split_sentences(U"").empty()); }

TEST(SplitSentences, NoSplitAtMaskedAbbreviation) {
  EXPECT_EQ(split_sentences(U"application no_ 36619/03 was filed.").size(), 1u);
}

TEST(SplitSentences, BlacklistAndInitials) {
  EXPECT_EQ(split_sentences(U"See Smith v. Jones for details.").size(), 1u);
  EXPECT_EQ(split_sentences(U"He cited Art. 6 of the Convention.").size(), 1u);
  EXPECT_EQ(split_sentences(U"Mr J. Smith arrived.").size(), 1u);
  EXPECT_EQ(split_sentences(U"He left. She stayed! Why? Because.").size(), 4u);
}

TEST(SplitSentences, SpansReconstructText) {
  const std::u32string text = U"  First one. Second one?  Third été.  ";
  const auto s = split_sentences(text);
  std::size_t cursor = 0;
  for (const auto& sentence : s) {
    ASSERT_GE(sentence.span.start, cursor);
    for (std::size_t i = cursor; i < sentence.span.start; ++i) EXPECT_TRUE(text[i] == U' ');
    EXPECT_EQ(text.substr(sentence.span.start, sentence.span.length()), sentence.text);
    cursor = sentence.span.end;
  }
  for (std::size_t i = cursor; i < text.size(); ++i) EXPECT_EQ(text[i], U' ');
}

AnnotatedDocument paolo_doc() {
  AnnotatedDocument d;
  d.id = "t1";
  d.text = "It happened on 19/10/2004. Paolo was in Amsterdam.";
  d.annotations = {{{15, 25}, EntityLabel::kDatetime, IdentifierClass::kQuasi},
                   {{27, 32}, EntityLabel::kPerson, IdentifierClass::kDirect},
                   {{40, 49}, EntityLabel::kLoc, IdentifierClass::kQuasi}};
  return d;
}

TEST(Localize, SentenceRelativeSpans) {
  const auto doc = paolo_doc();
  const auto sentences = split_sentences(utf8::decode(doc.text));
  const auto loc = localize(doc, sentences);
  ASSERT_EQ(loc.located.size(), 3u);
  EXPECT_EQ(loc.located[0].annotation.span, (Span{15, 25}));
  EXPECT_EQ(loc.located[1].annotation.span, (Span{0, 5}));
  EXPECT_EQ(loc.located[1].sentence_index, 1u);
  EXPECT_EQ(loc.located[2].annotation.span, (Span{13, 22}));
  const auto full = utf8::decode(doc.text);
  for (const auto& l : loc.located) {
    const auto& a = doc.annotations[l.annotation_index];
    EXPECT_EQ(sentences[l.sentence_index].text.substr(l.annotation.span.start, l.annotation.span.length()),
              full.substr(a.span.start, a.span.length()));
  }
}

TEST(Localize, StraddlingThrowsOrCollects) {
  auto doc = paolo_doc();
  doc.annotations.push_back({{20, 32}, EntityLabel::kMisc, IdentifierClass::kQuasi});
  const auto sentences = split_sentences(utf8::decode(doc.text));
  try {
    localize(doc, sentences);
    FAIL();
  } catch (const StraddlingAnnotation& e) {
    EXPECT_EQ(e.doc_id(), "t1");
    EXPECT_EQ(e.indices(), std::vector<std::size_t>{3});
  }
  const auto loc = localize(doc, sentences, StraddlePolicy::kCollect);
  EXPECT_EQ(loc.straddling, std::vector<std::size_t>{3});
  EXPECT_EQ(loc.located.size(), 3u);
}

TEST(Materialize, OneSamplePerSpan) {
  SentenceSpan s{"t1", {27, 50}, U"Paolo was in Amsterdam."};
  const auto out = materialize(s, {{{0, 5}, EntityLabel::kPerson, IdentifierClass::kDirect},
                                   {{13, 22}, EntityLabel::kLoc, IdentifierClass::kQuasi}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].redacted_sentence, "***** was in Amsterdam.");
  EXPECT_EQ(out[0].label, EntityLabel::kPerson);
  EXPECT_EQ(out[1].redacted_sentence, "Paolo was in *********.");
  EXPECT_EQ(out[1].label, EntityLabel::kLoc);

  SentenceSpan d{"t1", {0, 26}, U"It happened on 19/10/2004."};
  const auto dt = materialize(d, {{{15, 25}, EntityLabel::kDatetime, IdentifierClass::kQuasi}});
  EXPECT_EQ(dt[0].redacted_sentence, "It happened on **********.");

  SentenceSpan one{"x", {0, 3}, U"Abc"};
  EXPECT_EQ(materialize(one, {{{0, 1}, EntityLabel::kMisc, IdentifierClass::kQuasi}})[0].redacted_sentence, "*bc");
}

TEST(Materialize, OutsideSentenceRejected) {
  SentenceSpan one{"x", {0, 3}, U"Abc"};
  EXPECT_THROW(materialize(one, {{{2, 4}, EntityLabel::kMisc, IdentifierClass::kQuasi}}), PreconditionError);
}

TEST(DocumentSamples, InvariantsHold) {
  auto doc = paolo_doc();
  doc.text = "THE FACTS\n\nIt happened on 19/10/2004. Zoë was in Amsterdam.";
  doc.annotations = {{{26, 36}, EntityLabel::kDatetime, IdentifierClass::kQuasi},
                     {{38, 41}, EntityLabel::kPerson, IdentifierClass::kDirect},
                     {{49, 58}, EntityLabel::kLoc, IdentifierClass::kQuasi}};
  std::size_t dropped = 0;
  const auto samples = document_samples(doc, [&](const std::string&, std::size_t) { ++dropped; });
  EXPECT_EQ(dropped, 0u);
  ASSERT_EQ(samples.size(), doc.annotations.size());
  for (const auto& s : samples) {
    const auto plain = utf8::decode(s.sentence);
    const auto red = utf8::decode(s.redacted_sentence);
    ASSERT_EQ(plain.size(), red.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
      if (i >= s.span.start && i < s.span.end) {
        EXPECT_EQ(red[i], U'*');
      } else {
        EXPECT_EQ(red[i], plain[i]);
      }
    }
  }
  EXPECT_EQ(samples[1].redacted_sentence, "*** was in Amsterdam.");
}

TEST(DocumentSamples, StraddlersAreLoggedAndDropped) {
  auto doc = paolo_doc();
  doc.annotations.push_back({{20, 32}, EntityLabel::kMisc, IdentifierClass::kQuasi});
  std::vector<std::size_t> logged;
  const auto samples = document_samples(doc, [&](const std::string&, std::size_t i) { logged.push_back(i); });
  EXPECT_EQ(samples.size(), 3u);
  EXPECT_EQ(logged, std::vector<std::size_t>{3});
}

TEST(SamplesJsonl, RoundTrip) {
  const auto samples = document_samples(paolo_doc());
  const auto text = write_samples_jsonl(samples);
  EXPECT_EQ(read_samples_jsonl(text), samples);
  const auto j = sample_to_json(samples[2]);
  EXPECT_EQ(j["redacted"], "Paolo was in *********.");
  EXPECT_EQ(j["start"], 13);
  EXPECT_EQ(j["len"], 9);
  EXPECT_EQ(j["label"], "LOC");
}

TEST(SamplesJsonl, RejectsInconsistentRecord) {
  EXPECT_THROW(read_samples_jsonl(R"({"id":"a/0","doc":"a","sentence":"abc","redacted":"*bc","start":0,"len":2,"label":"LOC"})"),
               Error);
}

}  // namespace
}  // namespace rscope
