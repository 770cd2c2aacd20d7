pub mod oracle;
pub mod stub_server;
