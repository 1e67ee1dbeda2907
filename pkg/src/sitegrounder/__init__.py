"""Site-grounded retrieval-augmented chatbot engine.

Crawls a website into a text corpus, indexes it as embedding vectors and
answers conversational questions grounded in the retrieved passages.
All model calls go through pluggable clients with deterministic offline
stubs, so the whole pipeline runs without network access.
"""

__version__ = "0.1.0"
