pub mod doc;
pub mod exercise;
pub mod filters;
pub mod parser;
pub mod server;
pub mod site;
pub mod tools;

pub use doc::{serialize, Block, BlockKind, CellKind, CodeCell, Document, FilterDirective, Heading, HeadingStyle, Span};
pub use parser::{classify_cell, parse, ParseError, ParseErrorKind};
