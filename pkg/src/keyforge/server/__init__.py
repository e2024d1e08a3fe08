"""Key server: RPC/HTTP front ends over the signing service."""

from .httpd import HttpServer
from .rpc import Dispatcher, RpcClient, RpcServer
from .service import (
    DomainContext,
    KeyServerService,
    ParamCache,
    ParamRecord,
    space_from_config,
    space_to_config,
)
from .storage import KeyStore

__all__ = [
    "Dispatcher",
    "DomainContext",
    "HttpServer",
    "KeyServerService",
    "KeyStore",
    "ParamCache",
    "ParamRecord",
    "RpcClient",
    "RpcServer",
    "space_from_config",
    "space_to_config",
]
