#include "synthetic.hpp"

#include <array>
#include <string>
#include <string_view>

namespace rscope {

namespace {

struct LabelBank {
  std::vector<std::string_view> templates;  // "{}" marks the entity slot
  std::vector<std::string_view> values;
};

const std::array<LabelBank, kNumLabels>& banks() {
  static const std::array<LabelBank, kNumLabels> b{{
      {{"The applicant was arrested on {}.", "The hearing took place on {}.",
        "On {} the court delivered its judgment.", "The application was lodged on {}.",
        "The decision became final on {}.", "The applicant was released from custody on {}.",
        "The prosecutor filed an appeal on {}.", "The events at issue occurred in {}."},
       {"12 March 1998", "19/10/2004", "May 2001", "3 January 2010", "the summer of 1995", "14.02.2007",
        "late 1999", "25 December 2003", "the morning of 2 June 2005", "autumn 2012"}},
      {{"The case was examined by the {}.", "The applicant lodged a complaint with the {}.",
        "The {} dismissed the request.", "A letter was sent to the {}.",
        "The {} upheld the ruling of the lower court.", "The applicant was employed by the {}.",
        "The report was issued by the {}.", "The matter was referred to the {}."},
       {"Supreme Court", "Ministry of the Interior", "Istanbul Bar Association", "Court of Cassation",
        "Ankara State Security Court", "regional police directorate", "National Bank", "Red Cross",
        "municipal council", "Constitutional Court"}},
      {{"{} was represented by a lawyer.", "The applicant, {}, lodged the complaint himself.",
        "Mr {} gave evidence before the judge.", "The witness {} stated that he had seen the accident.",
        "{} signed the statement in the presence of two officers.",
        "The brother of the applicant, {}, was questioned by the police.",
        "Ms {} acted as counsel for the applicant.", "The victim, {}, later withdrew her complaint."},
       {"Paolo Rossi", "John Smith", "Ahmet Yilmaz", "Maria Kowalska", "Hans Becker", "Elena Petrova",
        "Mehmet Demir", "Anna Novak", "Jean Dupont", "Lucia Bianchi"}},
      {{"The applicant is a {} national.", "He stated that he was of {} origin.",
        "The victims belonged to the {} minority.", "She works as a {} in a public hospital.",
        "The applicant, a {} citizen, was detained at the border.",
        "The witness spoke only {} during the interview.", "His father was a retired {}.",
        "The community is largely {} by religion."},
       {"Turkish", "Kurdish", "Roma", "nurse", "Polish", "Orthodox", "teacher", "Muslim", "Russian",
        "farmer"}},
      {{"The applicant lives in {}.", "The incident happened near {}.",
        "He was transferred to a prison in {}.", "The family moved to {} after the war.",
        "The hearing was held at the courthouse in {}.", "The property is situated in {}.",
        "The applicant travelled from {} by train.", "The demonstration took place in {}."},
       {"Amsterdam", "Istanbul", "Warsaw", "the village of Ortakoy", "Diyarbakir", "Lyon", "Kyiv",
        "Bucharest", "the district of Sisli", "Milan"}},
      {{"The applicant relied on {} in his submissions.", "The newspaper article was entitled {}.",
        "The charges were brought under {}.", "The court applied {} to the facts.",
        "He was charged with {}.", "The applicant complained about {}.",
        "The prosecution invoked {} against him.", "The book in question was called {}."},
       {"the Code of Criminal Procedure", "the Press Act", "Law 3713", "the Anti-Terrorism Act",
        "aggravated theft", "the Civil Code", "fraud", "The Silent Valley", "membership of an illegal organisation",
        "the Prevention of Terrorism Act"}},
      {{"The court awarded the applicant {} in damages.", "The applicant was sentenced to {} of imprisonment.",
        "The plot of land measures {}.", "The fine amounted to {}.", "The detention lasted {} in total.",
        "He claimed {} for costs and expenses.", "The police seized {} of cash.",
        "The compensation was set at {}."},
       {"5,000 euros", "three years", "120 square metres", "2,500 Turkish liras", "eighteen months",
        "10,000 dollars", "40 days", "two hectares", "750 euros", "six months"}},
      {{"The case was registered under application {}.", "The judgment was recorded under file number {}.",
        "The vehicle had the registration plate {}.", "His passport number was {}.",
        "The decision bears the reference {}.", "The complaint was filed with case number {}.",
        "The bank account {} was frozen.", "The parcel is listed in the land register as {}."},
       {"12345/98", "44/2002", "K.2003/15", "34 ABC 123", "TR-771204", "2001/1234", "U 123456",
        "IBAN DE44 5001", "plot 117/3", "98-0034"}},
  }};
  return b;
}

constexpr std::array<std::string_view, 6> kLeadIns{
    "In addition, ", "According to the case file, ", "As the Government submitted, ",
    "It appears that ", "Subsequently, ", "The parties agree that "};

constexpr std::array<std::string_view, 8> kFillers{
    "The facts of the case may be summarised as follows.",
    "The applicant complained under the Convention.",
    "The Government contested that argument.",
    "The parties submitted further observations.",
    "The Court considers that the complaint is admissible.",
    "The proceedings are still pending.",
    "These facts are not disputed.",
    "The relevant domestic law is set out below."};

AnnotatedDocument make_document(EntityLabel label, std::size_t index, Rng& rng) {
  const LabelBank& bank = banks()[label_id(label)];
  std::string sentence(bank.templates[rng.index(bank.templates.size())]);
  const std::string_view value = bank.values[rng.index(bank.values.size())];

  if (rng.uniform() < 0.5) {
    const std::string_view lead = kLeadIns[rng.index(kLeadIns.size())];
    if (sentence.front() >= 'A' && sentence.front() <= 'Z') sentence.front() = static_cast<char>(sentence.front() + 32);
    sentence.insert(0, lead);
  }

  std::string text;
  if (rng.uniform() < 0.5) {
    text += kFillers[rng.index(kFillers.size())];
    text += ' ';
  }
  const std::size_t slot = sentence.find("{}");
  // Every template and value is ASCII, so byte offsets equal code-point offsets.
  const std::size_t start = text.size() + slot;
  text += sentence.substr(0, slot);
  text += value;
  text += sentence.substr(slot + 2);
  if (rng.uniform() < 0.5) {
    text += ' ';
    text += kFillers[rng.index(kFillers.size())];
  }

  AnnotatedDocument doc;
  doc.id = "syn-" + std::string(label_name(label)) + "-" + std::to_string(index);
  doc.text = std::move(text);
  doc.annotations.push_back(
      {{start, start + value.size()}, label, rng.uniform() < 0.5 ? IdentifierClass::kDirect : IdentifierClass::kQuasi});
  return doc;
}

}  // namespace

std::vector<AnnotatedDocument> generate_synthetic(Seed seed, const LabelCounts& counts) {
  Rng rng(derive_seed(seed, "synthetic"));
  std::vector<AnnotatedDocument> docs;
  std::size_t total = 0;
  for (auto c : counts) total += c;
  docs.reserve(total);
  for (auto l : kAllLabels) {
    for (std::size_t i = 0; i < counts[label_id(l)]; ++i) docs.push_back(make_document(l, i, rng));
  }
  return docs;
}

std::vector<AnnotatedDocument> generate_synthetic(Seed seed, std::size_t per_class) {
  LabelCounts counts;
  counts.fill(per_class);
  return generate_synthetic(seed, counts);
}

}  // namespace rscope
