//! Design concept phrase exploration over a lexical knowledge graph.
//!
//! [`lexicon`] loads edges, embeddings, frequencies and parts of speech into
//! an immutable [`LexiconStore`]. [`explorer`] runs the related-word and
//! antonym searches, [`session`] records exploration sessions, [`analytics`]
//! scores phrases and [`service`] exposes all of it as a request/response API.

pub mod analytics;
pub mod explorer;
pub mod lexicon;
pub mod metrics;
pub mod service;
pub mod session;

pub use analytics::{score_dcp, DcpReport, Flag};
pub use explorer::{search_antonyms, search_related, FilterConfig, RelatedWord};
pub use lexicon::{load_lexicon, LexiconBuilder, LexiconPaths, LexiconStore, Pos};
pub use service::{ApiRequest, ApiResponse, Engine};
pub use session::{ExplorationSession, SessionConfig, Slot};
