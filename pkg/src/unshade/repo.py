"""Maven-layout artifact retrieval with a local content cache.

Supports http(s) and file URLs; the latter lets the whole test suite run
against a directory posing as a repository. Cache writes go through a
temp file and an atomic rename, so a crashed download can never be
observed as a cache hit and concurrent fetchers of the same coordinate
settle on last-writer-wins.
"""

from __future__ import annotations

import logging
import os
import tempfile
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .coordinates import Coordinate
from .errors import NotFound, TransportError

logger = logging.getLogger(__name__)

CACHE_ENV = "UNSHADE_CACHE"
OFFLINE_ENV = "UNSHADE_OFFLINE"

DEFAULT_BASE_URL = "https://repo1.maven.org/maven2"


@dataclass(frozen=True)
class RepoConfig:
    base_url: str = DEFAULT_BASE_URL
    cache_dir: Path = Path.home() / ".cache" / "unshade"
    offline: bool = False
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @classmethod
    def from_env(cls, base_url: str | None = None, cache_dir: str | None = None,
                 offline: bool = False, timeout: float = 30.0, retries: int = 2) -> "RepoConfig":
        env_cache = os.environ.get(CACHE_ENV)
        cache = Path(cache_dir or env_cache or (Path.home() / ".cache" / "unshade"))
        if os.environ.get(OFFLINE_ENV) == "1":
            offline = True
        return cls(base_url or DEFAULT_BASE_URL, cache, offline, timeout, retries)


def artifact_path(c: Coordinate) -> str:
    """Relative repository path of the main JAR for a coordinate."""
    return (f"{c.group.replace('.', '/')}/{c.artifact}/{c.version}/"
            f"{c.artifact}-{c.version}.jar")


def _download(url: str, timeout: float, retries: int) -> bytes:
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(min(0.2 * 2 ** (attempt - 1), 5.0))
        try:
            with urllib.request.urlopen(url, timeout=timeout) as response:
                return response.read()
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise NotFound(url) from exc
            last_error = exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, FileNotFoundError) or isinstance(exc.reason, IsADirectoryError):
                raise NotFound(url) from exc
            last_error = exc
        except (TimeoutError, OSError) as exc:
            last_error = exc
        logger.warning("download attempt %d/%d failed for %s: %s",
                       attempt + 1, retries + 1, url, last_error)
    raise TransportError(f"{url}: {last_error}")


def fetch_artifact(cfg: RepoConfig, c: Coordinate) -> bytes:
    """Return JAR bytes from the cache, downloading on a miss.

    Offline mode never touches the network: a cache miss is NotFound.
    """
    rel = artifact_path(c)
    cached = Path(cfg.cache_dir) / rel
    if cached.is_file():
        return cached.read_bytes()
    if cfg.offline:
        raise NotFound(f"{c} not in cache and offline mode is on")
    url = cfg.base_url.rstrip("/") + "/" + rel
    data = _download(url, cfg.timeout, cfg.retries)
    cached.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=cached.parent, prefix=cached.name + ".")
    try:
        with os.fdopen(fd, "wb") as tmp:
            tmp.write(data)
        os.replace(tmp_path, cached)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise
    return data
