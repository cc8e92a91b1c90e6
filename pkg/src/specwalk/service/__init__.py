from .app import create_app
from .sessions import SessionStore, rle_encode

__all__ = ["create_app", "SessionStore", "rle_encode"]
