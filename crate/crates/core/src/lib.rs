//! Harmonization of OntoNotes-style coreference annotation into the
//! CorefUD scheme: CoNLL-U files whose MISC column carries entity brackets,
//! with zero pronouns encoded as empty nodes.
//!
//! * [`model`]: documents, mentions and clusters
//! * [`conllu`]: the CoNLL-U dialect reader and writer
//! * [`ontonotes`]: coreference SGML, treebank parses, and their alignment
//! * [`convert`]: IDENT chains, appositives and zero insertion
//! * [`stats`]: corpus statistics and scheme validation
//! * [`pipeline`]: batch runs, prediction merging and run reports

pub mod conllu;
pub mod convert;
pub mod model;
pub mod ontonotes;
pub mod pipeline;
pub mod stats;
