#pragma once

#include <string>

#include "ew/automata.hpp"
#include "ew/events.hpp"

namespace ew {

// Parsers for the textual forms produced by to_string on terms and formulas
// (parse_value lives next to Value). Both fail with ParseError on bad input.
Term parse_term(const std::string& text);
Formula parse_formula(const std::string& text);

// JSON automaton documents. parse_automaton_text checks every symbol
// reference against the declared signature and the builtin vocabulary and
// fails with ParseError (malformed document) or UnknownSymbol (valid JSON,
// unknown name; the message carries a closest-match suggestion). A document
// that makes it through serialize_automaton(parse_automaton_text(doc))
// is reproduced up to field order and formula whitespace.
std::string serialize_automaton(const MessageAutomaton& a);
MessageAutomaton parse_automaton_text(const std::string& doc);
// Reads path and delegates to parse_automaton_text; FileError when the file
// cannot be read.
MessageAutomaton parse_automaton(const std::string& path);

// Line-oriented trace form of an event structure. write_trace canonicalizes
// first, so write_trace(read_trace(t)) is stable. read_trace rebuilds the
// structure through EsBuilder and fails with ParseError on malformed lines.
std::string write_trace(const EventStructure& es);
EventStructure read_trace(const std::string& text);

}  // namespace ew
