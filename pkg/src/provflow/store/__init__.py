"""Durable, transactional persistence shared by multiple worker processes."""

from provflow.store.archive import export_archive, import_archive
from provflow.store.store import Store

__all__ = ["Store", "export_archive", "import_archive"]
